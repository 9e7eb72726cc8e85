"""The complete protocol on the noisy keyword task, three seeds.

NLL warm start per seed, then RL fine-tuning with RwB-hinge, RISK-2 and RISK-3
at gamma 0.9, plus an NLL continuation with the same budget as a control.
Takes roughly 7 minutes on one core.

Run: python demos/07_full_experiment.py [output-dir]
"""
import json
import logging
import sys

from rlsum.experiment import ExperimentConfig, run_experiment

logging.basicConfig(level=logging.INFO, format="%(message)s")
out = sys.argv[1] if len(sys.argv) > 1 else "experiment_out"

result = run_experiment(ExperimentConfig(), out_dir=out)
print(json.dumps(result.metrics_table(), indent=2))
print(json.dumps(result.significance(), indent=2))
print(json.dumps(result.novelty().as_rows(), indent=2))
print("reports in", out)
