# %% [markdown]
# # From keypoints to bounding boxes, and how to score them
#
# Boxes are cut from each keypoint's attention map by binarizing at a fraction
# of its peak. Candidates from all keypoints are pooled and the combination
# with the best F-score, then the best q, is kept.

# %%
import warnings

import numpy as np

from kpbms.bbox import BoundingBox
from kpbms.fixtures import make_fixture_set
from kpbms.generation import candidate_boxes, generate, select_combination
from kpbms.metrics import aggregate, evaluate, format_table
from kpbms.saliency import SaliencyConfig

config = SaliencyConfig(blob_fraction=0.3)
scene = make_fixture_set(1, "hard", seed=4)[0]
cands = candidate_boxes(scene.image, scene.keypoints, config, scene.image_id)
for j, group in enumerate(cands):
    print(f"keypoint {j}: {[b.coords for b in group]}")
chosen = select_combination(cands, scene.keypoints, image_id=scene.image_id)
print("selected:", [b.coords for b in chosen])

# %% [markdown]
# The quality terms penalize ambiguity: q_K drops when one box holds several
# keypoints, q_B drops when a keypoint is covered by several boxes.

# %%
print(evaluate(chosen, scene.keypoints).summary())

# %% [markdown]
# Over a whole fixture set, counts and reciprocals are pooled before the
# ratios are taken. A lazy baseline that draws one box around all keypoints
# of an image has perfect precision and recall, but poor q.

# %%
scenes = make_fixture_set(100, "hard", seed=12)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    ours = aggregate([evaluate(generate(s.image, s.keypoints, config, s.image_id), s.keypoints) for s in scenes])


def one_box(s):
    xs, ys = [k.x for k in s.keypoints], [k.y for k in s.keypoints]
    return [BoundingBox(min(xs), min(ys), max(xs), max(ys))] if xs else []


lazy = aggregate([evaluate(one_box(s), s.keypoints) for s in scenes])
print(format_table({"Bounding Box Generation": ours, "One box per image": lazy}))
print("mean keypoints per image:", np.mean([len(s.keypoints) for s in scenes]))
