//! Serialized bitstream shared by the arithmetic and Huffman coders.
//!
//! Each block is written as a 16-bit big-endian token count, a 32-bit
//! big-endian payload length in bits, then the payload bits MSB-first,
//! zero-padded to the next byte. Blocks follow each other with no other
//! framing.

use byteorder::{BigEndian, ByteOrder};
use thiserror::Error;

use crate::arith::EncodedBlock;
use crate::bits::{pack_bits, unpack_bits, BitBuffer};

/// Bytes of header in front of every block payload.
pub const BLOCK_HEADER_BYTES: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("block {index} has {count} tokens; the header holds at most 65535")]
    CountOverflow { index: usize, count: usize },
    #[error("block {index} payload of {bits} bits does not fit the 32-bit length field")]
    PayloadOverflow { index: usize, bits: usize },
    #[error("stream truncated inside block {index}")]
    Truncated { index: usize },
}

/// Serialized size of one block in bytes.
pub fn block_bytes(block: &EncodedBlock) -> usize {
    BLOCK_HEADER_BYTES + block.payload.len().div_ceil(8)
}

pub fn write_container(blocks: &[EncodedBlock]) -> Result<Vec<u8>, ContainerError> {
    let mut out = Vec::with_capacity(blocks.iter().map(block_bytes).sum());
    for (index, b) in blocks.iter().enumerate() {
        let count = u16::try_from(b.token_count).map_err(|_| ContainerError::CountOverflow {
            index,
            count: b.token_count,
        })?;
        let bits = u32::try_from(b.payload.len()).map_err(|_| ContainerError::PayloadOverflow {
            index,
            bits: b.payload.len(),
        })?;
        let mut header = [0u8; BLOCK_HEADER_BYTES];
        BigEndian::write_u16(&mut header[..2], count);
        BigEndian::write_u32(&mut header[2..], bits);
        out.extend_from_slice(&header);
        out.extend(pack_bits(b.payload.as_slice()));
    }
    Ok(out)
}

pub fn read_container(mut bytes: &[u8]) -> Result<Vec<EncodedBlock>, ContainerError> {
    let mut blocks = Vec::new();
    while !bytes.is_empty() {
        let index = blocks.len();
        if bytes.len() < BLOCK_HEADER_BYTES {
            return Err(ContainerError::Truncated { index });
        }
        let count = BigEndian::read_u16(&bytes[..2]) as usize;
        let bits = BigEndian::read_u32(&bytes[2..6]) as usize;
        bytes = &bytes[BLOCK_HEADER_BYTES..];
        let n = bits.div_ceil(8);
        if bytes.len() < n {
            return Err(ContainerError::Truncated { index });
        }
        blocks.push(EncodedBlock {
            token_count: count,
            payload: BitBuffer::from_bits(unpack_bits(&bytes[..n], bits)),
        });
        bytes = &bytes[n..];
    }
    Ok(blocks)
}
