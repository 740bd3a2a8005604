from .__about__ import __version__
from zoomstab.plant import SystemParams, VectorSystemParams
from zoomstab.quantizer import ZoomPolicy, QuantizerState
from zoomstab.channel import DmcModel, MemoryChannelModel, BlockCodebook
from zoomstab.config import ExperimentConfig, load_config
from zoomstab.experiment import run_experiment, summarize
import zoomstab.infotheory
import zoomstab.stability
import zoomstab.stats
import zoomstab.misc
