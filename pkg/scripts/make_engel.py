"""Write tests/data/engel.csv: the 235-row Engel food data plus a synthetic housing column.

The housing column is not part of the original data. It is generated
deterministically (seed 20) so a two-outcome fit can run at Engel scale.
"""

from pathlib import Path

import numpy as np
import statsmodels.api as sm

df = sm.datasets.engel.load_pandas().data
rng = np.random.default_rng(20)
income = df["income"].to_numpy()
food = df["foodexp"].to_numpy()
# housing share loosely tied to income and negatively to the food residual
resid = food - np.polyval(np.polyfit(income, food, 1), income)
housing = 0.12 * income * np.exp(0.25 * rng.standard_normal(income.size)) - 0.3 * resid
out = Path(__file__).resolve().parents[1] / "tests" / "data" / "engel.csv"
with open(out, "w", encoding="utf-8") as fh:
    fh.write("income,food,housing\n")
    for a, b, c in zip(income.tolist(), food.tolist(), housing.tolist()):
        fh.write(f"{a!r},{b!r},{round(c, 4)!r}\n")
print(out, income.size, np.median(income))
