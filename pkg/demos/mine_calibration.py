"""MINE against the closed form for correlated Gaussians.

For a bivariate normal with correlation rho the mutual information is
-0.5 * log(1 - rho^2).  The estimator is a lower bound, so it should sit at
or a little under the true value, and near zero for independent data.
"""
import math

import numpy as np

from grnppg import mine


def main() -> None:
    cfg = mine.MineConfig(batch_size=250, epochs=100)
    print(f"{'rho':>5}{'true':>9}{'MINE':>9}")
    for rho in (0.0, 0.3, 0.5, 0.7, 0.9):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4000)
        y = rho * x + math.sqrt(1 - rho * rho) * rng.normal(size=4000)
        est = mine.mine_train(x, y, cfg)
        print(f"{rho:5.1f}{-0.5 * math.log(1 - rho * rho) + 0.0:9.4f}{est.value:9.4f}")


if __name__ == "__main__":
    main()
