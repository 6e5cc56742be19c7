# Reference W / p-values from scipy.stats.shapiro (an independent AS R94
# implementation). Regenerate with: python3 shapiro_reference.py
import numpy as np, json
from scipy import stats
samples = {
 "heights_n11": [148,154,158,160,161,162,166,170,182,195,236],
 "mixed_n20": [2.1,3.4,1.9,5.6,4.4,3.3,2.8,3.9,4.1,3.0,2.2,6.8,3.7,4.9,3.1,2.6,4.0,3.5,5.1,2.9],
 "grid_n50": [i/49 for i in range(50)],
 "small_n3": [1.0,2.0,4.0],
 "skewed_n8": [1,1.5,2,2.2,3,5,9,20],
 "n5": [3.1, 2.7, 4.8, 3.9, 3.3],
}
q = stats.norm.ppf((np.arange(1,51)-0.5)/50)
samples["normal_quantiles_n50"] = q.tolist()
rng = np.random.default_rng(20230501)
bell = np.round(rng.normal(100.0, 15.0, 200), 6)
samples["bell_n200"] = bell.tolist()
out = {}
for k,v in samples.items():
    w,p = stats.shapiro(v)
    out[k] = {"x": v, "w": float(w), "p": float(p)}
    print(k, len(v), repr(float(w)), repr(float(p)))
json.dump(out, open("shapiro_reference.json", "w"), indent=1)
grid = [i/99 for i in range(100)]
