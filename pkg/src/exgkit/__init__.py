"""exgkit: a desk-scale EEG/EOG smart-glasses processing stack.

Subsystems:
  synth        labeled synthetic EOG/EEG generators
  dsp          IIR cascades, detrending, decimation, spectrograms
  eog          horizontal/vertical derivation, preprocessing chains, epochs
  ssvep        CCA against sinusoidal banks and the side-band ratio detector
  epidenet     the tiny CNN (forward + analytic gradients)
  training     Adam training loop and stratified k-fold evaluation
  quantize     post-training INT8 conversion, integer inference, MAC counts
  metrics      confusion matrices, accuracy metrics, information transfer rate
  framing      24-bit AFE scaling, frame codec, stream simulation
  recordings   recording/label file formats
  streaming    ring buffer and the sliding-window inference scheduler
  estimators   scikit-learn-style classifier front end
  cli          command-line interface binding everything together
"""
from . import (  # noqa: F401
    dsp,
    eog,
    epidenet,
    estimators,
    framing,
    metrics,
    params_io,
    quantize,
    recordings,
    ssvep,
    streaming,
    synth,
    training,
)
from .errors import (  # noqa: F401
    DegenerateInputError,
    ExgError,
    InternalError,
    ParameterError,
    RecordingFormatError,
)
from .records import MultiChannelRecord  # noqa: F401

__version__ = "0.1.0"
