import numpy as np

from skram.utils.run_report import InvalidParameterError


class NoiseStream():
    """Counter addressed Gaussian source keyed by (master seed, stream index).

    Every draw is a pure function of (master_seed, stream_index, counter): the Philox key is derived from
    the seed and the stream index, and the counter selects a disjoint block of the generator output.
    Ensemble draws of shape (P, ...) are filled row by row, so row j never depends on P.
    """

    def __init__(self, masterSeed, streamIndex=0, counter=0):
        """Initialize function.

            Parameters
            ----------
            masterSeed: int
                64-bit master seed.
            streamIndex: int
                path or ensemble identifier.
            counter: int
                index of the next step.
        """
        if masterSeed < 0 or streamIndex < 0:
            raise InvalidParameterError(f"seed and stream index must be nonnegative, got {masterSeed} and {streamIndex}")
        self.masterSeed = int(masterSeed)
        self.streamIndex = int(streamIndex)
        self.counter = int(counter)
        seq = np.random.SeedSequence(self.masterSeed, spawn_key=(self.streamIndex,))
        self._key = seq.generate_state(2, dtype=np.uint64)

    def __repr__(self):
        return f"NoiseStream(seed={self.masterSeed}, stream={self.streamIndex}, counter={self.counter})"

    def generator(self, counter):
        """Generator positioned at the block of the given counter."""
        bitGen = np.random.Philox(key=self._key, counter=np.array([0, int(counter), 0, 0], dtype=np.uint64))
        return np.random.Generator(bitGen)

    def normals(self, counter, shape):
        """Standard normal draws of the given shape for one counter value."""
        return self.generator(counter).standard_normal(shape)

    def uniforms(self, counter, shape):
        """Uniform draws on [0, 1) from a block disjoint from ``normals`` at the same counter."""
        bitGen = np.random.Philox(key=self._key, counter=np.array([0, int(counter), 1, 0], dtype=np.uint64))
        return np.random.Generator(bitGen).random(shape)

    def spawn(self, streamIndex):
        """Stream with the same master seed and another index."""
        return NoiseStream(self.masterSeed, streamIndex)

    def copy(self):
        return NoiseStream(self.masterSeed, self.streamIndex, self.counter)
