"""Regenerate the synthetic spectral profiles shipped in ``oiltfqkd/data``.

These are hand-shaped stand-ins for measured circulator/laser losses and an
InGaAs photodiode responsivity; they are not measurement data.
"""
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "oiltfqkd" / "data"
wl = np.arange(500.0, 2201.0, 10.0)


def write(name, values):
    lines = ["wavelength_nm,value_db"] + [f"{w:g},{v:.4f}" for w, v in zip(wl, values)]
    (OUT / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# circulator alone, laser port open: only crosstalk reaches the return port
disconnected = 48.0 + 2.0 * np.cos((wl - 500.0) / 170.0) + 1e-6 * (wl - 1550.0) ** 2
# facet and cavity reflections open a transparency window from 1200 nm onwards
gain = np.interp(wl, [500, 1150, 1200, 1300, 1800, 2200], [-0.5, -0.5, 0.0, 14.0, 16.0, 12.0])
gain += np.where(wl > 1200, 1.5 * np.sin((wl - 1200.0) / 35.0) ** 2, 0.0)
connected_off = disconnected - gain
connected_on = connected_off - np.where((wl > 1500) & (wl < 1600), 3.0, 0.0)
responsivity = np.interp(
    wl, [500, 800, 900, 1000, 1100, 1600, 1650, 1700, 1750, 2200],
    [-40, -30, -10, -1, 0, 0, -5, -20, -35, -40])
isolator = np.interp(wl, [500, 1000, 1450, 1650, 2200], [8.0, 15.0, 35.0, 35.0, 12.0])
shortpass = np.interp(wl, [500, 1580, 1600, 1620, 2200], [0.5, 0.5, 30.0, 60.0, 60.0])

write("loss_disconnected", disconnected)
write("loss_connected_off", connected_off)
write("loss_connected_on", connected_on)
write("ingaas_responsivity", responsivity)
write("isolator", isolator)
write("shortpass_filter", shortpass)
