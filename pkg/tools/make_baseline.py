"""Freeze the 128x128 / 3% DCT FDRI-vs-pinv PSNR table used as a regression baseline.

Usage: python3 tools/make_baseline.py [output.json]
"""
import json
import pathlib
import sys

from fdri.evaluation import compare_methods
from fdri.images import load_bundled_images

RES, RATIO = 128, 0.03
ROOT = pathlib.Path(__file__).resolve().parents[1]
DEFAULT_OUT = ROOT / "tests" / "data" / "baseline_dct128.json"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    out = pathlib.Path(argv[0]) if argv else DEFAULT_OUT
    images = load_bundled_images((RES, RES))
    db = list(images.values())
    record = {"resolution": RES, "ratio": RATIO}
    for key, binarized in (("binarized", True), ("continuous", False)):
        record[key] = compare_methods(images, db, RES, RATIO, "dct", binarized).as_dict()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    for key in ("binarized", "continuous"):
        r = record[key]
        print(f"{key:10s} fdri {r['mean_psnr_fdri']:.3f} dB  pinv {r['mean_psnr_pinv']:.3f} dB"
              f"  wins {r['fdri_wins']}/{len(r['images'])}")


if __name__ == "__main__":
    main()
