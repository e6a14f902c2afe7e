"""EEG speller rewards: from simulated scalp voltages to arm rewards.

The speller scenario turns "pull arm j" into "flash item j and score the
evoked scalp response".  Attended (target) flashes evoke a bump five times
the size of ignored ones, buried in spatially and temporally correlated
noise.  A stepwise linear discriminator trained on calibration epochs maps
each epoch to a scalar score: that score is the reward.  Run:

    python demos/04_p300_speller.py
"""

import numpy as np

from seqbai import (NONTARGET, TARGET, EEGConfig, RngStream, ScoreChannel,
                    generate_calibration, generate_epoch_batch, score_batch,
                    template, train_swlda)

cfg = EEGConfig()  # 16 electrodes x 25 samples, AR(1) noise, variance 1
print("== Evoked templates ==")
tgt, non = template(cfg, TARGET), template(cfg, NONTARGET)
peak = int(np.unravel_index(tgt.argmax(), tgt.shape)[1])
print(f"bump peaks at sample {peak + 1} of {cfg.window_len};"
      f" target/nontarget amplitude ratio = {float(tgt.max() / non.max()):g}")

print()
print("== Calibration and training ==")
data = generate_calibration(cfg, 120, 480, RngStream(11).generator())
model = train_swlda(data)
st = model.calib_stats
print(f"stepwise selection kept {len(model.selected)} of"
      f" {cfg.n_electrodes * cfg.window_len} features")
print(f"held-out score moments: target {st.target_mean:+.2f}"
      f" (var {st.target_var:.2f}), nontarget {st.nontarget_mean:+.2f}"
      f" (var {st.nontarget_var:.2f})")
print(f"score gap = {st.gap:.2f}, pooled variance = {st.pooled_var:.2f}"
      f" -> separation {st.gap / np.sqrt(st.pooled_var):.1f} standard"
      " deviations")

print()
print("== Fresh-epoch discrimination ==")
g = RngStream(12).generator()
fresh_t = generate_epoch_batch(cfg, [TARGET] * 200, g)
fresh_n = generate_epoch_batch(cfg, [NONTARGET] * 200, g)
s_t, s_n = score_batch(model, fresh_t), score_batch(model, fresh_n)
auc = float(np.mean(s_t[:, None] > s_n[None, :]))
print(f"rank AUC on 200+200 unseen epochs: {auc:.3f}")

print()
print("== Reward channel ==")
print("During a task the engine flashes items; the channel scores each")
print("flash.  Attending item 7, flashing items 7, 3, 7, 9:")
chan = ScoreChannel(model, cfg, RngStream(13, (0, 1, 1)),
                    RngStream(13, (0, 1, 0)))
for pulled in (7, 3, 7, 9):
    r = chan.draw(TARGET if pulled == 7 else NONTARGET)
    print(f"  flash item {pulled:2d}: reward {r:+.2f}")
print("Target flashes score high, the rest hover near the nontarget mean;")
print("the engine only ever sees these scalars.")
