"""grnppg: gated residual Transformers for PPG artifact detection, built on numpy.

Modules
-------
autodiff       reverse-mode automatic differentiation and Adam
activations    the activation catalog with derivatives
gating         GLU / GnLU variants and the gated residual network block
transformer    patch-token encoder classifier in three variants
mine           mutual information neural estimation
preprocessing  band-pass filtering, pulse segmentation, normalization
datagen        synthetic PPG recordings with labelled artifacts
metrics        classification metrics, ROC AUC and ADASYN
experiment     file-based pipeline stages used by the ``grnppg`` command
"""
__version__ = "0.1.0"
