from globalrnn.main import Study  # noqa ignore=F401
from globalrnn.train import ensemble_forecast, train_model, tune, validate  # noqa ignore=F401


__version__ = "0.1.0"
