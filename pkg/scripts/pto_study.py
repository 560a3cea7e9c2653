"""Recovery of the counterfactual bunching mass from PTO weeks and repeat bunchers.

Example: ``python scripts/pto_study.py --reps 40 --violation 0.0 0.3``
"""

import argparse
import math
import warnings

import numpy as np

from bunchkit.counterfactual_mass import p_from_pto, p_upper_nonchangers
from bunchkit.paycheck_data import lag_join
from bunchkit.simulator import SimConfig, oracle_p, simulate_isoelastic

TOL = 1e-9


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=40)
    ap.add_argument("--p-mass", type=float, default=0.1)
    ap.add_argument("--pto-prob", type=float, default=0.2)
    ap.add_argument("--persistence", type=float, default=1.0)
    ap.add_argument("--violation", type=float, nargs="+", default=[0.0, 0.3])
    ap.add_argument("--seed", type=int, default=2000)
    args = ap.parse_args()
    print("violation  truth    pto_mean  pto_se   nonchanger_mean  share_upper>=realized")
    for v in args.violation:
        pto, upper, real = [], [], []
        for r in range(args.reps):
            cfg = SimConfig(p_mass=args.p_mass, pto_prob=args.pto_prob, kstar_persistence=args.persistence,
                            pto_violation=v, seed=args.seed + r)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                table, latent = simulate_isoelastic(cfg)
                pto.append(p_from_pto(table, cfg.k, TOL).value)
            upper.append(p_upper_nonchangers(lag_join(table), cfg.k, TOL).value)
            real.append(oracle_p(latent, cfg.k))
        pto, upper, real = map(np.asarray, (pto, upper, real))
        print(f"{v:9.2f}  {cfg.p_at_kink:.4f}   {pto.mean():.4f}    {pto.std(ddof=1) / math.sqrt(args.reps):.5f}  "
              f"{upper.mean():.4f}           {np.mean(upper >= real):.3f}")


if __name__ == "__main__":
    main()
