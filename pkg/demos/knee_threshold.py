"""Where does a score vector bend?

Sort the scores, accumulate them as a percentage of the total and draw a
chord from the first point to the last. The knee is the point that sits
furthest above that chord; everything strictly above it is flagged.
"""

import numpy as np

from treeanomaly.threshold import cumulative_curve, knee_predict, knee_threshold

scores = [1, 2, 3, 10]
curve = cumulative_curve(scores)
print("cumulative %:", curve.ys.tolist())
print("knee:", knee_threshold(curve))

# A long quiet tail with a handful of loud points.
rng = np.random.default_rng(0)
noisy = np.concatenate([rng.exponential(size=500), [12.0, 15.0, 20.0]])
pred, thr, pct = knee_predict(noisy)
print(f"threshold {thr:.3f} at {pct:.1f}% of mass, flagged {pred.sum()} of {pred.size}")

# Rescaling never moves the decision.
same = np.array_equal(pred, knee_predict(noisy * 1000)[0])
print("scale invariant:", same)
