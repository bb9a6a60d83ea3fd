//! Labelled random sub-streams derived from one replication seed.
//!
//! Each consumer draws from its own stream so that adding or removing draws
//! in one (e.g. class assignment) never shifts another (e.g. demand).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Demand,
    Routing,
    Class,
    Placement,
}

impl Stream {
    fn label(self) -> &'static str {
        match self {
            Stream::Demand => "demand",
            Stream::Routing => "routing",
            Stream::Class => "class",
            Stream::Placement => "placement",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(stream.label())))
}

pub fn stream(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream))
}
