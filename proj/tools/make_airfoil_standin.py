"""Writes a synthetic stand-in for the UCI Airfoil Self-Noise table.

Same columns, feature grid and row count as the original. The target follows a
simplified turbulent-boundary-layer trailing-edge noise model (boundary layer
thickness from chord Reynolds number, a Strouhal-number spectrum shape, fifth
power Mach scaling) plus Gaussian noise, then is affinely mapped onto the
original's mean and spread.

    python3 tools/make_airfoil_standin.py data/airfoil_standin.csv
"""

import sys

import numpy as np

FREQS = np.array([200, 250, 315, 400, 500, 630, 800, 1000, 1250, 1600, 2000, 2500,
                  3150, 4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000], dtype=float)
ANGLES = np.array([0, 1.5, 2, 2.7, 3, 3.3, 4, 4.2, 4.8, 5.3, 5.4, 6.7, 7.2, 7.3, 8.4,
                   8.9, 9.5, 9.9, 11.2, 12, 12.3, 12.6, 12.7, 15.4, 15.6, 17.4, 19.7, 22.2])
CHORDS = np.array([0.0254, 0.0508, 0.1016, 0.1524, 0.2286, 0.3048])
SPEEDS = np.array([31.7, 39.6, 55.5, 71.3])
ROWS = 1503
NU = 1.5e-5
SOUND = 340.46


def thickness(chord, speed, angle):
    log_re = np.log10(speed * chord / NU)
    delta0 = chord * 10 ** (1.892 - 0.9045 * log_re + 0.0596 * log_re ** 2)
    return delta0 * 10 ** (0.0679 * np.minimum(angle, 12.5)) * 0.1


def spl(freq, chord, speed, angle, delta):
    mach = speed / SOUND
    strouhal = freq * delta / speed
    peak = 0.02 * mach ** -0.6 * 10 ** (0.0054 * (angle - 1.33) ** 2)
    a = np.log10(strouhal / peak)
    shape = -10.0 * np.log1p(2.0 * a ** 2)
    return 10 * np.log10(delta * mach ** 5 * 1e12) + shape - 0.25 * angle + 8 * np.log10(chord / 0.1)


def main(path):
    rng = np.random.default_rng(20240501)
    rows = []
    while len(rows) < ROWS:
        chord = rng.choice(CHORDS)
        speed = rng.choice(SPEEDS)
        angle = rng.choice(ANGLES)
        count = rng.integers(6, 16)
        start = rng.integers(0, len(FREQS) - count + 1)
        for f in FREQS[start:start + count]:
            rows.append((f, angle, chord, speed))
    data = np.array(rows[:ROWS])
    delta = thickness(data[:, 2], data[:, 3], data[:, 1])
    target = spl(data[:, 0], data[:, 2], data[:, 3], data[:, 1], delta)
    target = target + rng.normal(0.0, 1.2, ROWS)
    target = 124.836 + 6.899 * (target - target.mean()) / target.std()
    with open(path, "w") as out:
        out.write("frequency,angle_of_attack,chord_length,free_stream_velocity,"
                  "suction_side_displacement_thickness,scaled_sound_pressure\n")
        for (f, angle, chord, speed), d, t in zip(data, delta, target):
            out.write(f"{f:g},{angle:g},{chord:g},{speed:g},{d:.9g},{t:.3f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/airfoil_standin.csv")
