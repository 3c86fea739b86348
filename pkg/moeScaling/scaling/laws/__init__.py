from moeScaling.scaling.laws import final_law, wang_law, abnar_law
from moeScaling.errors import ConfigError
from moeScaling.param import lossLawVariantList

lawModules = {
    "final": final_law,
    "wang": wang_law,
    "abnar": abnar_law,
}


def get_law(variant):
    if variant not in lawModules:
        raise ConfigError(f"Loss law variant {variant} is not supported, available variants are: {lossLawVariantList}")
    return lawModules[variant]


__all__ = ["final_law", "wang_law", "abnar_law", "lawModules", "get_law"]
