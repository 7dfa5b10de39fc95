"""Print the TV upper bound and Poisson verdict for each sigma of a sweep config.

    python scripts/sigma_sweep.py [configs/converge_lattice.json] [--threads N]
"""

import argparse

from poissonprop import config, experiments
from poissonprop.diagnostics import goodness_of_fit


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/converge_lattice.json")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = config.load(args.config)
    pl = cfg.build_path_loss()
    print(f"{'sigma':>6} {'upper':>10} {'mean':>8} {'disp':>7} {'KS p':>7}  verdict")
    for k, sigma in enumerate(cfg.sigmas):
        fad = cfg.fading_for(sigma)
        rep = experiments.tv_report(cfg, pl, fad, args.threads)
        batch, M = experiments.simulate_config(cfg, pl, fad, stream=k, threads=args.threads)
        g = goodness_of_fit(batch, M, level=cfg.level)
        print(f"{sigma!s:>6} {rep['upper']:10.4g} {g.mean_count:8.4f} {g.dispersion_index:7.3f} "
              f"{g.ks_pvalue:7.3f}  {g.verdict}")


if __name__ == "__main__":
    main()
