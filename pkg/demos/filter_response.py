"""The pulse band-pass filter, measured against its analytic response.

A forward-backward pass squares the magnitude response and cancels the
phase.  Each probe sinusoid is filtered, its amplitude is read off by a
least-squares fit away from the edges, and the result is set beside
``analytic_gain(f) ** 2``.
"""
import numpy as np

from grnppg import preprocessing as pp


def main() -> None:
    fs, spec = 128.0, pp.FilterSpec()
    t = np.arange(int(60 * fs)) / fs
    edge = int(5 * fs)
    print(f"band {spec.low_cut_hz}-{spec.high_cut_hz} Hz, order {spec.order}, pad {spec.padlen}")
    print(f"{'Hz':>6}{'measured':>12}{'|H|^2':>12}")
    for f in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
        y = pp.bandpass_filtfilt(pp.RawSignal(np.sin(2 * np.pi * f * t), fs), spec).samples
        tt = t[edge:-edge]
        basis = np.column_stack([np.sin(2 * np.pi * f * tt), np.cos(2 * np.pi * f * tt)])
        amp = np.hypot(*np.linalg.lstsq(basis, y[edge:-edge], rcond=None)[0])
        print(f"{f:6.1f}{amp:12.4e}{float(pp.analytic_gain(f, spec, fs)) ** 2:12.4e}")


if __name__ == "__main__":
    main()
