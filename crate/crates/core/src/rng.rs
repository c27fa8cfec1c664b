//! Counter-based random numbers.
//!
//! Every random decision in the engine is a pure function of a 64-bit key
//! and a tuple of counters (step, phase, voxel index, ...). Results are
//! therefore independent of iteration order and thread scheduling, and
//! stable across platforms. Not cryptographically secure.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline(always)]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key together with an ordered list of counter words.
#[inline]
pub fn hash_words(key: u64, words: &[u64]) -> u64 {
    let mut h = mix64(key ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        let salt = GOLDEN.wrapping_mul(i as u64 + 1);
        h = mix64(h ^ mix64(w.wrapping_add(salt)));
    }
    h
}

/// Maps 64 random bits to a double in `[0, 1)` using the top 53 bits.
#[inline(always)]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives a child key for a named sub-stream.
pub fn derive_key(key: u64, tag: &str) -> u64 {
    hash_words(key, &[fnv1a64(tag.as_bytes())])
}

/// 64-bit FNV-1a, used to turn identifiers into stable integers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Per-row seed for epoch streaming: a pure function of the global seed, the
/// epoch, and the row identity.
pub fn mix_seed(global_seed: u64, epoch: u64, row_key: u64) -> u64 {
    hash_words(global_seed, &[epoch, row_key])
}

/// Serde adapter for 64-bit seeds in formats limited to signed integers
/// (TOML): writes a decimal string, reads a string or an integer.
pub mod seed_serde {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = u64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a non-negative integer or decimal string")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("seed must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                v.trim().parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Stateless counter-keyed generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub const fn new(key: u64) -> Self {
        Self { key }
    }

    pub const fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn bits(&self, words: [u64; 4]) -> u64 {
        hash_words(self.key, &words)
    }

    #[inline]
    pub fn uniform(&self, words: [u64; 4]) -> f64 {
        unit_f64(self.bits(words))
    }

    /// Bernoulli draw. `p >= 1` always succeeds, `p <= 0` never does.
    #[inline]
    pub fn bernoulli(&self, p: f64, words: [u64; 4]) -> bool {
        if p <= 0.0 {
            false
        } else {
            self.uniform(words) < p
        }
    }
}

/// Sequential stream built on the same hash: draw `i` is `hash(key, [i])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Independent stream for a named purpose.
    pub fn for_purpose(key: u64, tag: &str) -> Self {
        Self::new(derive_key(key, tag))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = hash_words(self.key, &[self.counter]);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi]` (degenerates to `lo` when `hi <= lo`).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`, `n > 0`. Uses rejection to avoid modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
