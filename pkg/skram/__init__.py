from skram.utils.skram_config import SkramConfig

# output paths, worker cap and numerical defaults
config = SkramConfig

__version__ = SkramConfig.version

__all__ = ['config', '__version__']
