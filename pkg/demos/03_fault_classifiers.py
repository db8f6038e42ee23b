"""Train the fault-type classifier and one bus locator on a small dataset.

The production configuration uses 100 runs per case (18,400 traces) and the
full 30-epoch budget; this demo uses 5 runs per case and a short budget so
it finishes in about a minute while exercising the entire pipeline:
dataset -> LSTM classifier -> SVM baseline -> per-kind locator -> metrics.
"""

from gridseer import build_default_grid
from gridseer.faultsim import FAULT_KINDS, gen_fault_dataset
from gridseer.gridml import (
    ClassifierConfig, classify_fault_type, evaluate, predict_fault_bus,
    stratified_split, train_bus_locator, train_fault_type_model,
    train_fault_type_svm,
)

grid = build_default_grid()
print("synthesizing 5 runs per case...")
dataset = gen_fault_dataset(grid, runs_per_case=5, seed=42)
print(f"{len(dataset.traces)} traces")

config = ClassifierConfig(epochs=8, patience=3)
model = train_fault_type_model(dataset, config, seed=42)
print(f"\nfault-type test accuracy: {model.metadata['test_accuracy']:.3f} "
      f"({model.metadata['epochs_run']} epochs)")

svm = train_fault_type_svm(dataset, seed=42)
faulted = [t for t in dataset.traces if t.label_kind in FAULT_KINDS]
strata = [(t.label_kind, t.label_bus) for t in faulted]
_, test_idx = stratified_split(strata, 0.2, 42)
test_traces = [faulted[i] for i in test_idx]
print(f"on the shared held-out split: "
      f"lstm={evaluate(model, test_traces)['accuracy']:.3f} "
      f"svm={evaluate(svm, test_traces)['accuracy']:.3f}")

locator = train_bus_locator(dataset, "ThreePhase", config, seed=42)
print(f"\nThreePhase locator test accuracy: "
      f"{locator.metadata['test_accuracy']:.3f}")

sample = next(t for t in test_traces if t.label_kind == "ThreePhase")
kind, probs = classify_fault_type(model, sample)
bus, _ = predict_fault_bus(locator, sample)
print(f"held-out trace truth=({sample.label_kind}, bus {sample.label_bus}) "
      f"-> predicted ({kind}, bus {bus}), p={probs.max():.2f}")
