"""Trapezoid step and truncation convergence for a flat density on [-1, 1].

Prints the L-infinity error of the segment SOE against the closed form for
a sequence of steps h at fixed M, and for a sequence of M at fixed h.

    python scripts/strip_rate.py --M 12 --T 100
"""
import argparse
import math

from soebath.contour import QuadratureParams, build_segment_soe
from soebath.oracle import closed_form
from soebath.soe import linf_error, time_grid
from soebath.spectral import SpectralModel, effective_segments, make_preset


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=float, default=12.0)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=0.01)
    args = p.parse_args()
    m = SpectralModel(make_preset("step", [-1, 1]), "fermion", math.inf, 2.0, "lesser")
    seg = effective_segments(m)[0]
    ref = closed_form(m)(time_grid(args.T, args.dt))
    th = math.pi / 12
    print(f"fixed M = {args.M:g}")
    for h in (0.5, 0.25, 0.125, 0.0625, 0.03125):
        soe = build_segment_soe(seg, QuadratureParams(th, th, h, args.M))
        print(f"  h = {h:<8g} N = {soe.N:<5d} Linf = {linf_error(soe, ref, args.T, args.dt):.3e}")
    print("fixed h = 0.05")
    for M in (4, 8, 12, 16, 20):
        soe = build_segment_soe(seg, QuadratureParams(th, th, 0.05, M))
        print(f"  M = {M:<8g} N = {soe.N:<5d} Linf = {linf_error(soe, ref, args.T, args.dt):.3e}")


if __name__ == "__main__":
    main()
