import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def synthetic_region(tmp_path_factory):
    """Shared 3-department, 2-year fixture."""
    from firerisk.synth import generate_synthetic_region

    out = tmp_path_factory.mktemp("region")
    depts = generate_synthetic_region(out, seed=42, n_departments=3, n_years=2)
    return out, depts


@pytest.fixture(scope="session")
def pipeline_run(synthetic_region, tmp_path_factory):
    """One full pipeline execution on the shared synthetic region."""
    from firerisk import pipeline

    data, _ = synthetic_region
    out = tmp_path_factory.mktemp("pipeline_out")
    config = pipeline.PipelineConfig(
        events=data / "events.csv",
        weather=data / "weather.csv",
        gazetteer=data / "gazetteer.csv",
        grids=data / "grids.json",
        static_dir=data / "static",
        out_root=out,
        options={"split": {"train_years": [2021], "val_years": [],
                           "test_years": [2022]}},
    )
    runner = pipeline.run_pipeline(config)
    return config, runner


def random_weather(rng, n):
    """Admissible random daily weather rows (temp, rain, wind_kmh, rh)."""
    temp = rng.uniform(-10, 38, n)
    rain = np.where(rng.random(n) < 0.3, rng.gamma(1.5, 5.0, n), 0.0)
    wind = rng.uniform(0, 60, n)
    rh = rng.uniform(5, 100, n)
    return np.column_stack([temp, rain, wind, rh])
