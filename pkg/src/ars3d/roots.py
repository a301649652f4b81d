"""Bracketed scalar root finding: bisection plus one secant polish.

Brackets used in this package are analytically guaranteed, so robustness is
preferred over iteration count.
"""

from __future__ import annotations


def bisect_root(f, lo: float, hi: float, width: float = 1e-13,
                max_iter: int = 200) -> float:
    """Root of f in [lo, hi] where f(lo) and f(hi) have opposite signs.

    Bisects until the bracket is narrower than ``width`` (or ``max_iter``
    steps), then applies a single secant step inside the final bracket.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError(f"root not bracketed on [{lo}, {hi}]")
    for _ in range(max_iter):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    if fhi != flo:
        s = hi - fhi * (hi - lo) / (fhi - flo)
        if lo <= s <= hi:
            return s
    return 0.5 * (lo + hi)
