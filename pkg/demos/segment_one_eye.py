"""Segment a few synthetic eyes and compare the recovered circles with the truth.

    python demos/segment_one_eye.py
"""
import numpy as np

from irisrec.normalization import rubber_sheet
from irisrec.preprocess import preprocess
from irisrec.segmentation import segment
from irisrec.synth import SyntheticEyeSpec, occluder_mask, render_eye


def main():
    spec = SyntheticEyeSpec(classes=6, images_per_class=2)
    for label in range(spec.classes):
        img, truth, _ = render_eye(spec, label, 0)
        pre = preprocess(img)
        geo = segment(pre)
        p_err = np.subtract(geo.pupil.as_tuple(), truth["pupil"])
        i_err = np.subtract(geo.iris.as_tuple(), truth["iris"])
        lid = occluder_mask(truth, img.shape)
        recall = f"{(geo.eyelid_mask & lid).sum() / lid.sum():.2f}" if lid.any() else "no lid"
        rect = rubber_sheet(pre, geo)
        print(f"class {label}: pupil err {np.round(p_err, 2)}  iris err {np.round(i_err, 2)}  "
              f"lid recall {recall}  sheet coverage {rect.coverage:.2f}")


if __name__ == "__main__":
    main()
