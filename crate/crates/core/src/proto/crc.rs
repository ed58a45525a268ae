//! CRC-16/MCRF4XX, the X.25 accumulator used by the frame checksum.

pub const CRC_INIT: u16 = 0xFFFF;

#[inline]
pub fn crc_accumulate(byte: u8, crc: u16) -> u16 {
    let mut tmp = byte ^ (crc & 0xFF) as u8;
    tmp ^= tmp << 4;
    let tmp = u16::from(tmp);
    (crc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4)
}

pub fn crc_accumulate_slice(bytes: &[u8], crc: u16) -> u16 {
    bytes.iter().fold(crc, |acc, &b| crc_accumulate(b, acc))
}

/// Checksum of `bytes` starting from the init value, no final xor.
pub fn crc16(bytes: &[u8]) -> u16 {
    crc_accumulate_slice(bytes, CRC_INIT)
}

/// Frame checksum: `bytes` followed by the message's seed byte.
pub fn crc16_with_extra(bytes: &[u8], crc_extra: u8) -> u16 {
    crc_accumulate(crc_extra, crc16(bytes))
}
