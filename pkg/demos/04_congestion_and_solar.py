"""Weather -> solar power prediction -> congestion classification.

Two congestion models are trained: one that sees the realized solar output
("known power") and one that must rely on power predicted from weather.
The prediction gap shows up as a small accuracy drop near the congestion
boundary.
"""

from gridseer import build_default_grid
from gridseer.gridml import (
    gen_congestion_samples, predict_congestion, predict_solar_power,
    train_congestion_model, train_solar_model,
)
from gridseer.weather import WeatherSample, solar_capacity_factor

grid = build_default_grid()

solar_model = train_solar_model(seed=0, n_samples=4000, epochs=50)
noon = WeatherSample(irradiance=1000.0, ambient_temp=25.0, cloud_cover=0.0, hour=12)
night = WeatherSample(irradiance=0.0, ambient_temp=14.0, cloud_cover=0.5, hour=2)
print("solar predictor (0.38 pu plant):")
print(f"  clear noon: {predict_solar_power(solar_model, noon, 0.38):.3f} pu "
      f"(formula {0.38 * solar_capacity_factor(noon):.3f})")
print(f"  night:      {predict_solar_power(solar_model, night, 0.38):.4f} pu")

print("\nsampling 1200 operating scenarios...")
samples = gen_congestion_samples(grid, 1200, seed=0, solar_model=solar_model)
congested = sum(s.congested for s in samples)
print(f"{congested} congested / {len(samples)}")

known = train_congestion_model(samples, "KnownPower", seed=0)
predicted = train_congestion_model(samples, "PredictedPower", seed=0)
print(f"known-power test accuracy:     {known.metadata['test_accuracy']:.3f}")
print(f"predicted-power test accuracy: {predicted.metadata['test_accuracy']:.3f}")

risky = max(samples, key=lambda s: s.load_profile.sum() - s.actual_solar.sum())
print(f"\nstressiest sample (hour {risky.weather.hour}, "
      f"load {risky.load_profile.sum():.2f} pu, "
      f"solar {risky.actual_solar.sum():.2f} pu): "
      f"p(congested) = {predict_congestion(known, risky):.2f}, "
      f"truth = {risky.congested}")
