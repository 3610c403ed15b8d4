"""Lead-I ECG classification and blinded reader-study toolkit.

Pipeline: record ingestion -> lead-I segmentation -> continuous wavelet
scalogram -> DenseNet-style classifier over {NSR, AFIB, OTHER, NOISE},
plus the statistical machinery (precision/recall/F1, Cohen's kappa with
CI, ROC/AUC) used to compare the model against human raters.
"""

__version__ = "0.1.0"
