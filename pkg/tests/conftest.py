import numpy as np
import pytest

from thzsounder.waveform import FrameLayout, PulseShape, frame_waveform


@pytest.fixture(scope="session")
def default_layout():
    return FrameLayout.default()


@pytest.fixture(scope="session")
def default_shape():
    return PulseShape()


@pytest.fixture(scope="session")
def default_tx(default_layout, default_shape):
    return frame_waveform(default_layout, default_shape)


@pytest.fixture(scope="session")
def small_layout():
    """Reduced frame for fast receiver tests (1023/511 chips, 8 reps)."""
    from thzsounder.waveform import generate_mseq
    return FrameLayout(header=generate_mseq(10), body=generate_mseq(9),
                       repetitions=8, chip_duration_ns=0.1)


@pytest.fixture(scope="session")
def small_tx(small_layout, default_shape):
    return frame_waveform(small_layout, default_shape)


def match_components(true_delays, detected_delays, detected_powers_db):
    """Nearest-delay matching of detected components to ground truth."""
    import numpy as np
    idx = [int(np.argmin(np.abs(np.asarray(detected_delays) - d)))
           for d in true_delays]
    return (np.asarray(detected_delays)[idx],
            np.asarray(detected_powers_db)[idx])
