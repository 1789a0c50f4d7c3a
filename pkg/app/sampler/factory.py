from app.core.exceptions import FactoryConfigurationError
from app.sampler.base import BaseSampler
from app.sampler.dynamic import DynamicSgldSampler
from app.sampler.static import StaticGibbsSampler
from app.schemas import DynamicConfig, StaticConfig


def get_sampler(config) -> BaseSampler:
    """
    Factory function to get a sampler for a model configuration.

    Args:
        config: StaticConfig or DynamicConfig (anything exposing `mode`)

    Returns:
        StaticGibbsSampler or DynamicSgldSampler instance

    Raises:
        FactoryConfigurationError: If the mode is unknown or the config type does not match
    """
    mode = getattr(config, "mode", None)
    if mode is None:
        raise FactoryConfigurationError(
            "sampler", f"Invalid configuration format: {type(config)}"
        )

    if mode == "static" and isinstance(config, StaticConfig):
        return StaticGibbsSampler(config)
    if mode == "dynamic" and isinstance(config, DynamicConfig):
        return DynamicSgldSampler(config)

    raise FactoryConfigurationError(
        "sampler",
        f"Unknown sampler mode: '{mode}'. Available options: ['static', 'dynamic']",
    )
