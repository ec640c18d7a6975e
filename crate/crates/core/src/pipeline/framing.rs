use crate::arith::EncodedBlock;
use crate::bits::{read_uint, BitBuffer};
use crate::corpus::BlockPlan;

/// Code used for the reference transmission that fixes `num_unified`.
pub const REFERENCE_CODE: &str = "ldpc_49_24";
/// Block size of the reference transmission.
pub const REFERENCE_BLOCK_SIZE: usize = 64;

/// Message bits for one source block: count header, payload, zero padding to
/// a multiple of `k`.
pub fn frame_block(block: &EncodedBlock, k: usize) -> Vec<u8> {
    let mut bits = BitBuffer::new();
    bits.push_uint(block.token_count as u64, BlockPlan::COUNT_BITS);
    bits.extend_from(block.payload.as_slice());
    let mut v = bits.into_vec();
    v.resize(v.len().div_ceil(k) * k, 0);
    v
}

/// Inverse of [`frame_block`] on received message bits. The payload keeps
/// the trailing padding since the receiver cannot tell it apart.
pub fn deframe_block(bits: &[u8]) -> Option<EncodedBlock> {
    let w = BlockPlan::COUNT_BITS as usize;
    if bits.len() < w {
        return None;
    }
    Some(EncodedBlock {
        token_count: read_uint(&bits[..w], w) as usize,
        payload: BitBuffer::from_bits(bits[w..].to_vec()),
    })
}

/// Channel bits needed to send `blocks` with an `(n, k)` code.
pub fn framed_bits(blocks: &[EncodedBlock], n: usize, k: usize) -> usize {
    blocks
        .iter()
        .map(|b| (BlockPlan::COUNT_BITS as usize + b.payload.len()).div_ceil(k) * n)
        .sum()
}
