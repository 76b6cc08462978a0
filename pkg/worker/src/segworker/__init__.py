"""Fine-tuning worker: trains a segmentation backbone one epoch per request
over a newline-delimited JSON protocol and reports validation mIoU and
wall-clock cost."""

__version__ = "0.1.0"
