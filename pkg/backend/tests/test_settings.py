from app.settings import DEFAULT_QUADRATURE, QuadratureSettings, load_settings


def test_defaults_without_env(monkeypatch):
    for name in ("MIRANDA_LAYERS_THREADS", "MIRANDA_LAYERS_UPSAMPLE_CAP", "MIRANDA_LAYERS_OUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    settings = load_settings()
    assert settings.threads == 2
    assert settings.out_dir == "out"
    assert settings.quadrature == DEFAULT_QUADRATURE


def test_env_overrides_and_bad_values_fall_back(monkeypatch):
    monkeypatch.setenv("MIRANDA_LAYERS_THREADS", "5")
    monkeypatch.setenv("MIRANDA_LAYERS_NEAR_RATIO", "not-a-number")
    monkeypatch.setenv("MIRANDA_LAYERS_UPSAMPLE_CAP", "0")
    settings = load_settings()
    assert settings.threads == 5
    assert settings.quadrature.near_ratio == 3.0
    assert settings.quadrature.upsample_cap == 1


def test_merged_ignores_none_and_unknown_keys():
    base = QuadratureSettings()
    merged = base.merged({"near_ratio": 5.0, "upsample_cap": None, "unrelated": 1})
    assert merged.near_ratio == 5.0
    assert merged.upsample_cap == base.upsample_cap
    assert base.merged(None) is base
