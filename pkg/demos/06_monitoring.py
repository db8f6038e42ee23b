"""Streaming grid monitoring out of a live voltage feed.

A monitor keeps a sliding 100-sample window of per-bus voltage magnitudes.
Once the window fills, every new sample produces a classification: the
fault-type model names the event and the matching locator names the bus
(0 means healthy). This demo trains small models, then replays a stream
with a three-phase fault injected partway through.

The `gridseer monitor` CLI consumes the same newline-delimited JSON format
from stdin, so any PMU gateway stand-in can drive it:

    gridseer monitor --fault-model model.gsnn --locator-models locators/
"""

import numpy as np

from gridseer import build_default_grid
from gridseer.cli import classify_window
from gridseer.faultsim import FAULT_KINDS, FaultSpec, gen_fault_dataset, synthesize_trace
from gridseer.gridml import ClassifierConfig, train_bus_locator, train_fault_type_model

grid = build_default_grid()
print("training compact monitor models (5 runs per case)...")
dataset = gen_fault_dataset(grid, runs_per_case=5, seed=11)
config = ClassifierConfig(epochs=12, patience=4)
fault_model = train_fault_type_model(dataset, config, seed=11)
locators = {k: train_bus_locator(dataset, k, config, seed=11) for k in FAULT_KINDS}

healthy = synthesize_trace(grid, None, 77)
faulted = synthesize_trace(grid, FaultSpec(kind="ThreePhase", bus_id=14,
                                           onset_step=20), 78)
stream = np.vstack([healthy.samples, faulted.samples])
onset = 100 + 20
print(f"\nstream of {stream.shape[0]} samples, fault hits at step {onset}")

window = 100
last = None
for step in range(window - 1, stream.shape[0]):
    emission = classify_window(stream[step - window + 1:step + 1],
                               fault_model, locators)
    state = (emission["fault_kind"], emission["bus"])
    if state != last:
        print(f"  step {step:3d}: kind={emission['fault_kind']:<11} "
              f"bus={emission['bus']:2d} confidence={emission['confidence']:.2f}")
        last = state
