//! Bit sequences and MSB-first packing.

/// An append-only bit sequence `m`; each element is 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitBuffer {
    bits: Vec<u8>,
}

impl BitBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters; other characters panic.
    pub fn from_str01(s: &str) -> Self {
        Self::from_bits(
            s.chars()
                .map(|c| match c {
                    '0' => 0,
                    '1' => 1,
                    _ => panic!("not a bit: {c:?}"),
                })
                .collect(),
        )
    }

    #[inline]
    pub fn push(&mut self, bit: u8) {
        self.bits.push(bit & 1);
    }

    /// Emits `bit` followed by `pending` copies of its complement.
    #[inline]
    pub fn push_with_pending(&mut self, bit: u8, pending: u64) {
        self.push(bit);
        for _ in 0..pending {
            self.push(bit ^ 1);
        }
    }

    pub fn extend_from(&mut self, other: &[u8]) {
        self.bits.extend(other.iter().map(|b| b & 1));
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push(((value >> i) & 1) as u8);
        }
    }

    /// Number of emitted bits `N_k`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.bits
    }

    pub fn to_str01(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// Packs MSB-first, zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

/// Unpacks the first `count` MSB-first bits of `bytes`.
pub fn unpack_bits(bytes: &[u8], count: usize) -> Vec<u8> {
    (0..count).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// Reads the first `width` bits as an unsigned big-endian integer.
pub fn read_uint(bits: &[u8], width: usize) -> u64 {
    bits[..width].iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}
