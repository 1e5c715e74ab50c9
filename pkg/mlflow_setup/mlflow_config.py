"""
MLflow Configuration

Tracking settings for `drroots experiment --track`. Runs go to a local
`./mlruns` store unless MLFLOW_TRACKING_URI points at a server.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

MLFLOW_TRACKING_URI = os.getenv("MLFLOW_TRACKING_URI", "file:./mlruns")
MLFLOW_EXPERIMENT_NAME = os.getenv("MLFLOW_EXPERIMENT_NAME", "derivative-root-annuli")
# Only used when the experiment does not exist yet
MLFLOW_ARTIFACT_LOCATION = os.getenv("MLFLOW_ARTIFACT_LOCATION")

RUN_TAGS = {"project": "drroots"}


def setup_mlflow():
    """Point mlflow at the tracking store and select (or create) the experiment."""
    import mlflow

    mlflow.set_tracking_uri(MLFLOW_TRACKING_URI)
    if MLFLOW_ARTIFACT_LOCATION and mlflow.get_experiment_by_name(MLFLOW_EXPERIMENT_NAME) is None:
        mlflow.create_experiment(MLFLOW_EXPERIMENT_NAME, artifact_location=MLFLOW_ARTIFACT_LOCATION)
        logger.info("[OK] Created MLflow experiment with artifacts at %s", MLFLOW_ARTIFACT_LOCATION)
    mlflow.set_experiment(MLFLOW_EXPERIMENT_NAME)

    logger.info("[OK] MLflow tracking URI: %s", MLFLOW_TRACKING_URI)
    logger.info("[OK] MLflow experiment: %s", MLFLOW_EXPERIMENT_NAME)
    return mlflow
