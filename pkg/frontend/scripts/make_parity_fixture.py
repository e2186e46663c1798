"""Build the 200-item parity fixture: prediction/ground-truth JSONL files
for the CLI plus the same items as one JSON document for the client test.

Usage: python3 make_parity_fixture.py OUT_DIR
"""

import json
import random
import sys
from pathlib import Path

from fsukit import AttrValue, FsuEntry, FsuGroup, FunctionType, GlobalAttributes
from fsukit.schema import SignDecomposition, canonical_serialize

TURNS = ("Go Straight", "Turn Left", "Turn Right", "U-Turn", "Merge Left")
ROADS = ("Fulong Rd", "Mingle Rd", "Haining Road", "The Bund", "Nanjing Rd", "Renmin Ave")


def make_gt(rng: random.Random, function: FunctionType) -> SignDecomposition:
    count = rng.randint(1, 3)
    entries = []
    for i in range(count):
        if function == FunctionType.LANE:
            attrs = [("Turn", AttrValue.scalar(rng.choice(TURNS)))]
        elif function == FunctionType.DIRECTION:
            attrs = [
                ("Direction", AttrValue.scalar(rng.choice(TURNS))),
                ("Destination", AttrValue.scalar(rng.choice(ROADS))),
            ]
        elif function == FunctionType.NOTICE:
            attrs = [("Vehicle Type", AttrValue.scalar("Trucks"))]
        else:
            attrs = [("Construction Site", AttrValue.scalar("Ahead 500 Meters"))]
        entries.append(FsuEntry(function=function, attrs=tuple(attrs), index=i + 1))
    globals_ = GlobalAttributes(
        traffic_sign="Yes",
        electronic_sign=rng.choice(("Yes", "No")),
        obstruction="No",
        truncation="No",
        blur=rng.choice(("Yes", "No")),
    )
    return SignDecomposition(
        globals=globals_,
        groups=(FsuGroup(function=function, declared_count=count, entries=tuple(entries)),),
    )


def main() -> None:
    out_dir = Path(sys.argv[1])
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(424242)
    functions = list(FunctionType)

    items = []
    for i in range(200):
        gt_text = canonical_serialize(make_gt(rng, functions[i % 4]))
        kind = i % 5
        if kind == 0:
            raw = f"<caption>c</caption><FSU>{gt_text}</FSU>"
        elif kind == 1:
            raw = f"<FSU>{gt_text}</FSU>"  # missing caption: gated to zero
        elif kind == 2:
            raw = "<caption>c</caption><FSU>{broken"  # unparsable body
        elif kind == 3:
            tweaked = gt_text.replace('"Traffic Sign": "Yes"', '"Traffic Sign": "No"')
            raw = f"<caption>c</caption><FSU>{tweaked}</FSU>"
        else:
            other = canonical_serialize(make_gt(rng, functions[(i + 1) % 4]))
            raw = f"<caption>c</caption><FSU>{other}</FSU>"
        items.append({"id": f"p{i:03d}", "response_text": raw, "ground_truth": gt_text})

    with open(out_dir / "pred.jsonl", "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {"id": item["id"], "response_text": item["response_text"]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(out_dir / "gt.jsonl", "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {"id": item["id"], "ground_truth": item["ground_truth"]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(out_dir / "items.json", "w", encoding="utf-8") as fh:
        json.dump(items, fh, ensure_ascii=False)
    print(f"wrote 200-item fixture to {out_dir}")


if __name__ == "__main__":
    main()
