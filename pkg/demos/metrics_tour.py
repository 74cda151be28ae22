"""Tour of the metric suite on a small constructed batch: lexical statistics,
self-BLEU, embedding diversity, and the projection-space estimators against
their analytic values.

Run: python demos/metrics_tour.py
"""

import math

import numpy as np

from collapse_lab import metrics as M


def main():
    texts = [
        "The quick brown fox jumps over the lazy dog",
        "A quick brown fox jumped over a sleeping dog",
        "Stock markets rallied after the announcement",
        "Rain is expected across the northern coast tomorrow",
        "The quick brown fox jumps over the lazy dog",
    ]
    print("batch of", len(texts), "texts")
    print(f"  avg_text_length   {M.avg_text_length(texts):8.2f} chars")
    print(f"  word_entropy      {M.word_entropy(texts):8.4f} bits")
    print(f"  type_token_ratio  {M.type_token_ratio(texts):8.4f}")
    print(f"  self_bleu         {M.self_bleu(texts):8.4f}  (high = low lexical diversity)")

    print("\nhand-checkable BLEU: candidate 'the cat sat' vs reference")
    print("'the cat sat on the mat' has perfect clipped precisions and a")
    score = M.bleu("the cat sat".split(), ["the cat sat on the mat".split()], max_n=3)
    print(f"brevity penalty exp(1-6/3): bleu = {score:.6f} = e^-1 = {math.exp(-1):.6f}")

    rng = np.random.default_rng(0)
    tight = rng.normal(loc=(1.0, 0.0, 0.0), scale=0.01, size=(100, 3))
    spread = rng.normal(size=(100, 3))
    print("\nembedding-space diversity (mean pairwise cosine distance):")
    print(f"  tight cluster   {M.cosine_diversity(tight):8.5f}")
    print(f"  isotropic cloud {M.cosine_diversity(spread):8.5f}")
    print(f"  isotropic, k=10 neighborhood only: {M.knn_cosine_diversity(spread, 10):8.5f}")

    n = 10_000
    square = rng.uniform(size=(n, 2))
    gauss = rng.normal(size=(n, 2))
    print("\nKozachenko-Leonenko entropy (k=50) vs analytic values:")
    print(f"  uniform unit square  {M.kl_entropy(square, 50):+8.4f}  (analytic 0)")
    print(f"  standard 2-D normal  {M.kl_entropy(gauss, 50):+8.4f}  "
          f"(analytic ln(2*pi*e) = {math.log(2 * math.pi * math.e):.4f})")

    bimodal = np.vstack([rng.normal(loc=(-6, 0), size=(n // 2, 2)),
                         rng.normal(loc=(6, 0), size=(n // 2, 2))])
    g1 = M.gaussianity_aic(gauss)
    g2 = M.gaussianity_aic(bimodal)
    print("\nGaussian-fit AIC (lower = more Gaussian at equal n):")
    print(f"  single mode  {g1['aic']:12.1f}   per point {g1['aic_per_point']:.4f}")
    print(f"  two modes    {g2['aic']:12.1f}   per point {g2['aic_per_point']:.4f}")

    emb = rng.normal(size=(500, 16)) * np.linspace(3.0, 0.5, 16)
    proj = M.pca_2d(emb)
    print(f"\npca_2d fallback projection: input 16-D -> {proj.shape}, "
          f"axis variances {proj.var(axis=0).round(2)}")

    scores = [50, 50, 0, 100, 25, 75, -1, -1, 50]
    bins = M.lean_bins(scores)
    print("\npolitical-lean binning of", scores)
    print(f"  bin proportions {['%.3f' % p for p in bins['proportions']]}")
    print(f"  neutral fraction {bins['neutral_fraction']:.3f}, "
          f"non-political fraction {bins['non_political_fraction']:.3f}")


if __name__ == "__main__":
    main()
