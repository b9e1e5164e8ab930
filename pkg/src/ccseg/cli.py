"""Command-line entry points for dataset generation, simulation, and serving.

Exit codes: 0 on success, 1 for usage errors (bad flags or values), 2 for
runtime failures (missing files, malformed inputs, I/O errors).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import aggregate, foggyblob, report as report_mod
from .mask import (
    CCAnnotation,
    SingularAnnotation,
    load_mask_png,
    save_cc_pngs,
    save_mask_png,
)
from .report import ImageAnnotations


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("cannot be negative")
    return value


def _annotator_spec(text: str) -> tuple[int, int]:
    """Parse counts like "3s,1c" into (singular, cc)."""
    singular = cc = 0
    for token in text.split(","):
        m = re.fullmatch(r"(\d+)([sc])", token.strip())
        if not m:
            raise argparse.ArgumentTypeError(
                f"bad annotator spec {token!r}; use forms like 3s,1c"
            )
        count = int(m.group(1))
        if m.group(2) == "s":
            singular += count
        else:
            cc += count
    if singular + cc == 0:
        raise argparse.ArgumentTypeError("spec names zero annotators")
    return singular, cc


def _default_profiles(singular: int, cc: int, seed: int) -> list:
    """Deterministic annotator pool: varied sensitivities, mild jitter."""
    import numpy as np

    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0xA11]))
    )
    profiles = []
    for i in range(singular):
        profile = foggyblob.AnnotatorProfile(
            seed=int(rng.integers(0, 2**32)),
            sensitivity=float(np.round(rng.uniform(0.25, 0.95), 3)),
            boundary_jitter=int(rng.integers(0, 3)),
        )
        profiles.append((f"s{i}", profile, "singular"))
    for i in range(cc):
        profile = foggyblob.AnnotatorProfile(
            seed=int(rng.integers(0, 2**32)),
            boundary_jitter=int(rng.integers(0, 3)),
        )
        profiles.append((f"cc{i}", profile, "cc"))
    return profiles


def _profiles_from_spec(path: Path) -> list:
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if not isinstance(spec, list) or not spec:
        raise ValueError("profile spec must be a non-empty JSON list")
    profiles = []
    counters = {"singular": 0, "cc": 0}
    for item in spec:
        kind = item.get("kind")
        if kind not in counters:
            raise ValueError(f"profile kind must be singular or cc, got {kind!r}")
        name = item.get("name") or (
            f"s{counters['singular']}" if kind == "singular" else f"cc{counters['cc']}"
        )
        counters[kind] += 1
        fields = {
            k: item[k]
            for k in (
                "seed",
                "sensitivity",
                "boundary_jitter",
                "low_threshold",
                "high_threshold",
            )
            if k in item
        }
        if "seed" not in fields:
            raise ValueError(f"profile {name!r} is missing a seed")
        profiles.append((name, foggyblob.AnnotatorProfile(**fields), kind))
    return profiles


def cmd_foggyblob(args) -> int:
    cfg = foggyblob.FoggyConfig(
        image_size=args.image_size,
        blur_sigma=args.blur_sigma,
        noise_amp=args.noise_amp,
        seed=args.seed,
    )
    manifest = foggyblob.generate_dataset(cfg, args.n, args.out)
    print(
        f"wrote {len(manifest['samples'])} samples to {args.out} "
        f"(dataset {manifest['dataset_id']})"
    )
    return 0


def _load_samples(manifest_path: Path):
    manifest = foggyblob.load_manifest(manifest_path)
    root = manifest_path.parent
    samples = [foggyblob.load_sample(root, entry) for entry in manifest["samples"]]
    return manifest, samples


def cmd_simulate(args) -> int:
    manifest_path = Path(args.dataset)
    manifest, samples = _load_samples(manifest_path)

    if args.profile_spec:
        tagged = _profiles_from_spec(Path(args.profile_spec))
    else:
        singular_n, cc_n = args.annotators
        tagged = _default_profiles(singular_n, cc_n, args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    n_annotations = 0
    for sample in samples:
        sid = f"{sample.index:04d}"
        entry: dict = {"image_id": sid, "singular": [], "cc": []}
        for name, prof, kind in tagged:
            if kind == "singular":
                ann = foggyblob.simulate_singular(sample, prof)
                rel = f"{sid}_{name}.png"
                save_mask_png(ann.mask, out / rel)
                entry["singular"].append({"annotator": name, "mask": rel})
            else:
                ann = foggyblob.simulate_cc(sample, prof)
                save_cc_pngs(ann, out, f"{sid}_{name}")
                entry["cc"].append(
                    {
                        "annotator": name,
                        "min": f"{sid}_{name}_min.png",
                        "max": f"{sid}_{name}_max.png",
                    }
                )
            n_annotations += 1
        images.append(entry)

    index = {
        "dataset": str(manifest_path),
        "dataset_id": manifest["dataset_id"],
        "images": images,
    }
    (out / "annotations.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {n_annotations} annotations for {len(samples)} images to {out}")
    return 0


def _load_index(path: Path) -> tuple[dict, Path]:
    with open(path, encoding="utf-8") as fh:
        index = json.load(fh)
    if "images" not in index:
        raise ValueError(f"{path} is not an annotation index")
    return index, path.parent


def _index_items(index: dict, base: Path) -> list[ImageAnnotations]:
    items = []
    for entry in index["images"]:
        singular = [
            SingularAnnotation(load_mask_png(base / rec["mask"]))
            for rec in entry.get("singular", [])
        ]
        ccs = [
            CCAnnotation(
                min=load_mask_png(base / rec["min"]),
                max=load_mask_png(base / rec["max"]),
            )
            for rec in entry.get("cc", [])
        ]
        items.append(ImageAnnotations(entry["image_id"], singular, ccs))
    return items


def _fmt(value, digits: int = 4) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{digits}f}"


def _fmt_test(doc) -> str:
    if doc is None:
        return "n/a"
    return (
        f"statistic = {doc['statistic']:.4f}, p = {doc['p_value']:.3g} "
        f"(n = {doc['n']})"
    )


def cmd_report(args) -> int:
    index, base = _load_index(Path(args.annotations))
    items = _index_items(index, base)
    doc = report_mod.dataset_report(items)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0
    s = doc["summary"]
    print(f"images: {s['n_images']}")
    print(
        "expected underflow  cc "
        + _fmt(s["mean_expected_underflow"]["cc"])
        + "  base "
        + _fmt(s["mean_expected_underflow"]["base"])
    )
    print(
        "expected overflow   cc "
        + _fmt(s["mean_expected_overflow"]["cc"])
        + "  base "
        + _fmt(s["mean_expected_overflow"]["base"])
    )
    print("underflow cc vs base: " + _fmt_test(s["capacity_tests"]["underflow_cc_vs_base"]))
    print("overflow  cc vs base: " + _fmt_test(s["capacity_tests"]["overflow_cc_vs_base"]))
    d = s["mean_disagreement"]
    print(
        "disagreement  singular "
        + _fmt(d["singular"])
        + "  min "
        + _fmt(d["min"])
        + "  max "
        + _fmt(d["max"])
    )
    print("min vs singular: " + _fmt_test(s["disagreement_tests"]["min_vs_singular"]))
    print("max vs singular: " + _fmt_test(s["disagreement_tests"]["max_vs_singular"]))
    print("uncertainty correlation: " + _fmt_test(s["uncertainty_correlation"]))
    return 0


def cmd_pseudo_cc(args) -> int:
    index, base = _load_index(Path(args.annotations))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    count = 0
    for entry in index["images"]:
        singular = [
            load_mask_png(base / rec["mask"]) for rec in entry.get("singular", [])
        ]
        if not singular:
            continue
        annotation_set = aggregate.AnnotationSet(
            entry["image_id"], [SingularAnnotation(m) for m in singular]
        )
        cc = aggregate.pseudo_cc(annotation_set)
        sid = entry["image_id"]
        save_cc_pngs(cc, out, sid)
        images.append(
            {
                "image_id": sid,
                "singular": [],
                "cc": [
                    {
                        "annotator": "pseudo",
                        "min": f"{sid}_min.png",
                        "max": f"{sid}_max.png",
                    }
                ],
            }
        )
        count += 1
    result = {
        "dataset": index.get("dataset"),
        "dataset_id": index.get("dataset_id"),
        "images": images,
    }
    (out / "annotations.json").write_text(
        json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {count} synthesized confidence contours to {out}")
    return 0


def cmd_export_labels(args) -> int:
    index, base = _load_index(Path(args.cc))
    labels = []
    for entry in index["images"]:
        ccs = entry.get("cc", [])
        for rec in ccs:
            label_id = (
                entry["image_id"]
                if len(ccs) == 1
                else f"{entry['image_id']}_{rec['annotator']}"
            )
            labels.append(
                aggregate.TrainingLabel(
                    image_id=label_id,
                    min_channel=load_mask_png(base / rec["min"]),
                    max_channel=load_mask_png(base / rec["max"]),
                )
            )
    if not labels:
        raise ValueError("annotation index holds no confidence contours")
    manifest = aggregate.export_labels(labels, args.out)
    print(f"exported {len(manifest['labels'])} training labels to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import AnnotationService, DatasetIndex, create_app
    from .store import Store

    store_dir = args.store or os.environ.get("CC_STORE_DIR")
    if not store_dir:
        raise ValueError("no store directory: pass --store or set CC_STORE_DIR")
    datasets = [DatasetIndex.from_manifest(Path(p)) for p in args.dataset]
    service = AnnotationService(
        Store(store_dir), datasets, images_per_method=args.images_per_method
    )
    app = create_app(service)
    print(
        f"serving {len(datasets)} dataset(s) on {args.host}:{args.port} "
        f"(store: {store_dir})"
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="ccseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("foggyblob", help="generate a synthetic blob dataset")
    p.add_argument("--n", type=_positive_int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--image-size", type=_positive_int, default=128)
    p.add_argument("--blur-sigma", type=float, default=2.5)
    p.add_argument("--noise-amp", type=_nonneg_int, default=4)
    p.set_defaults(func=cmd_foggyblob)

    p = sub.add_parser("simulate", help="run simulated annotators over a dataset")
    p.add_argument("--dataset", required=True, help="dataset manifest.json")
    p.add_argument(
        "--annotators",
        type=_annotator_spec,
        default=(3, 1),
        help="counts like 3s,1c (singular and confidence-contour annotators)",
    )
    p.add_argument("--profile-spec", help="JSON file of explicit annotator profiles")
    p.add_argument("--seed", type=int, default=0, help="profile generation seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="compute study metrics from annotations")
    p.add_argument("--annotations", required=True, help="annotation index JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true", help="print the full report JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser(
        "pseudo-cc", help="synthesize confidence contours from singular annotations"
    )
    p.add_argument("--annotations", required=True, help="annotation index JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo_cc)

    p = sub.add_parser("export-labels", help="write two-channel training labels")
    p.add_argument("--cc", required=True, help="annotation index with cc entries")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_labels)

    p = sub.add_parser("serve", help="run the annotation study service")
    p.add_argument(
        "--dataset", action="append", required=True, help="dataset manifest.json"
    )
    p.add_argument("--store", help="store directory (default: $CC_STORE_DIR)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--images-per-method", type=_positive_int, default=40)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 0
    except Exception as exc:
        print(f"ccseg: error: {exc}", file=sys.stderr)
        return 2
