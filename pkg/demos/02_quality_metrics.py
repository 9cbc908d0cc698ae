"""
IoU, PSNR, and match rates
==========================

The three measurements the benchmark is built on.
"""

import numpy as np

from degrade_bench import BoundingBox, grayscale_roundtrip, iou, match_rate, mse, psnr

# IoU: 1.0 is a perfect match, 0 is no overlap.
gt = BoundingBox(0, 0, 10, 10)
print("identical:", iou(gt, gt))
print("disjoint: ", iou(gt, BoundingBox(20, 20, 30, 30)))
print("shifted +5:", iou(gt, BoundingBox(5, 0, 15, 10)))  # 1/3

# PSNR against an 8-bit peak of 255; identical images are "infinitely" good.
rng = np.random.default_rng(0)
image = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
print("psnr(identical):", psnr(image, image.copy()).psnr_db)

noisy = np.clip(image.astype(int) + rng.integers(-8, 9, image.shape), 0, 255).astype(np.uint8)
quality = psnr(image, noisy)
print(f"psnr(noisy): {quality.psnr_db:.2f} dB (mse {quality.mse:.2f})")
print("mse all-0 vs all-255:", mse(np.zeros_like(image), np.full_like(image, 255)))

# Grayscale roundtrip keeps three channels but collapses them to BT.601 luma;
# applying it twice changes nothing.
gray = grayscale_roundtrip(image)
print("gray equals gray(gray):", np.array_equal(gray, grayscale_roundtrip(gray)))

# Match rate: the fraction of frames whose best detection reaches the IoU
# threshold (0.5, inclusive, matching the evaluation convention).
ious = [0.9, 0.6, 0.5, 0.4, 0.0]
print("match rate @0.5:", match_rate(ious, 0.5))
