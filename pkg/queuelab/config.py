__all__ = ['Config', 'config_from_file', 'default_config']

import os

from yaml import safe_load as _safe_load

with open(os.path.join(os.path.dirname(__file__), "default_config.yaml"), "rb") as default_config_file:
    default_config = _safe_load(default_config_file)


def _merge(base: dict, override: dict) -> dict:
    merged = {**base}
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merged[key] = {**base[key], **value}
        else:
            merged[key] = value
    return merged


class Config:
    __slots__ = ('_dict',)

    def __init__(self, config_dict: dict = None) -> None:
        self._dict = _merge(default_config, config_dict or {})

    def __getattr__(self, item):
        return self._dict.get(item)

    def get(self, *args, **kwargs):
        return self._dict.get(*args, **kwargs)

    def section(self, name: str) -> dict:
        """Return a copy of one configuration section, empty if it does not exist."""
        return dict(self._dict.get(name) or {})


def config_from_file(file_path: str = None) -> Config:
    if file_path is None:
        return Config()

    with open(file_path, "rb") as config_file:
        config = _safe_load(config_file)

    return Config(config or {})
