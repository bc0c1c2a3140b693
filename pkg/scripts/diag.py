"""Quality diagnostic for default-config tuning on the synthetic benchmark."""
import sys
import time

import numpy as np

from seerzsl.pipeline import RunConfig, _load_run_data, train_full
from seerzsl.evaluation import ridge_nearest_mean_oracle


def main(beta_vae, beta_cvae, wgan_epochs, lam, seed=0, extra=None):
    config = RunConfig(
        synthetic={"classes": 20, "per_class": 50, "sem_dim": 16, "visual_dim": 64,
                   "noise_sigma": 0.1, "seed": 0},
        beta_vae=beta_vae, beta_cvae=beta_cvae, wgan_epochs=wgan_epochs,
        lambda_guidance=lam, seed=seed, **(extra or {}),
    )
    dataset, split = _load_run_data(config)
    oracle = ridge_nearest_mean_oracle(dataset, split)
    t0 = time.perf_counter()
    bundle, report = train_full(config)
    dt = time.perf_counter() - t0

    feats = dataset.features[split.train_seen_idx]
    labels = dataset.labels[split.train_seen_idx]
    rng = np.random.default_rng(123)
    gen = bundle.synthesize(labels, rng)
    errs = [np.linalg.norm(gen[labels == y].mean(0) - feats[labels == y].mean(0))
            for y in split.seen_classes]
    intra = np.linalg.norm(gen[labels == split.seen_classes[0]] - gen[labels == split.seen_classes[0]].mean(0), axis=1).mean()
    kl_end = report.loss_curves.get("vae_kl", [float("nan")])[-1]
    cvae_kl = report.loss_curves.get("cvae_kl", [float("nan")])[-1]
    print(f"bv={beta_vae} bc={beta_cvae} we={wgan_epochs} lam={lam} seed={seed} "
          f"{extra or ''} | S={report.seen_accuracy:.1f} U={report.unseen_accuracy:.1f} "
          f"H={report.harmonic:.1f} conv={report.conventional_unseen:.1f} "
          f"P={report.precision:.2f} R={report.recall:.2f} | gap={np.mean(errs):.2f} "
          f"spread={intra:.2f} vaeKL={kl_end:.2f} cvaeKL={cvae_kl:.2f} | "
          f"oracleH={oracle['H']:.1f} need={0.8 * oracle['H']:.1f} | {dt:.0f}s", flush=True)


if __name__ == "__main__":
    args = sys.argv[1:]
    main(float(args[0]), float(args[1]), int(args[2]), float(args[3]),
         int(args[4]) if len(args) > 4 else 0)
