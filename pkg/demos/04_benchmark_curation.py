"""Benchmark curation: typed falsification operators and paired texts.

Operators are applied with explicit seeds, so every record is reproducible;
the dataset statistics aggregate per category and recombine exactly.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from _demo_model import RuleModel

from claimtree import Category, PerturbationOperator, curate, falsify, stats
from claimtree.bench import applicable_operators, derive_record_seed

print("falsification operators:")
examples = [
    ("Timolol lowers intraocular pressure", PerturbationOperator.NEGATION, 0),
    ("Adults need 600 IU vitamin D daily", PerturbationOperator.NUMERIC_PERTURBATION, 3),
    ("Timolol lowers intraocular pressure.", PerturbationOperator.ENTITY_SUBSTITUTION, 11),
    ("Elevated intraocular pressure causes optic nerve damage.", PerturbationOperator.CAUSAL_REVERSAL, 0),
]
for claim, operator, seed in examples:
    falsified, meta = falsify(claim, operator, seed)
    print(f"  {operator.value:20s} {claim!r}")
    print(f"  {'':20s} -> {falsified!r}")

claim = "Warfarin raises bleeding risk in 2 percent of patients."
print(f"\napplicable operators for {claim!r}:")
print(f"  {[op.value for op in applicable_operators(claim)]}")

passage = (
    "Glaucoma damages the optic nerve gradually. "
    "Timolol lowers intraocular pressure. "
    "Laser treatment improves fluid outflow. "
    "Annual eye examinations detect progression early. "
    "Adherence to eye drops preserves remaining vision."
)
records = []
for i in range(4):
    seed = derive_record_seed(2024, f"demo-{i}")
    records.append(
        curate(passage, Category.TREATMENT, seed, RuleModel(), record_id=f"demo-{i}")
    )

print("\ncurated records (one falsified claim each):")
for record in records:
    falsified = record.falsified_claims()[0]
    print(f"  {record.id}: {falsified.perturbation.operator.value:20s} -> {falsified.text}")

summary = stats(records)
row = summary.per_category["treatment"]
print(
    f"\nstats: texts={row.num_texts} claims={row.num_claims} "
    f"avg_tokens={row.avg_tokens:.1f} positive_rate={row.positive_rate:.3f}"
)
