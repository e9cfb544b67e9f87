//! CRC-8 with polynomial 0x07, zero init, no reflection, no final xor.

const POLY: u8 = 0x07;

const fn build_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u8;
        let mut b = 0;
        while b < 8 {
            c = if c & 0x80 != 0 { (c << 1) ^ POLY } else { c << 1 };
            b += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static TABLE: [u8; 256] = build_table();

pub fn crc8(bytes: &[u8]) -> u8 {
    crc8_update(0, bytes)
}

pub fn crc8_update(mut crc: u8, bytes: &[u8]) -> u8 {
    for &b in bytes {
        crc = TABLE[(crc ^ b) as usize];
    }
    crc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bitwise(bytes: &[u8]) -> u8 {
        let mut crc = 0u8;
        for &b in bytes {
            crc ^= b;
            for _ in 0..8 {
                crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            }
        }
        crc
    }

    #[test]
    fn check_value() {
        // Standard check input for CRC-8/SMBUS (same parameters).
        assert_eq!(crc8(b"123456789"), 0xF4);
    }

    #[test]
    fn table_matches_bitwise() {
        let data: Vec<u8> = (0..=255u8).rev().collect();
        assert_eq!(crc8(&data), bitwise(&data));
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let block: Vec<u8> = (0..64u8).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect();
        let good = crc8(&block);
        for byte in 0..block.len() {
            for bit in 0..8 {
                let mut bad = block.clone();
                bad[byte] ^= 1 << bit;
                assert_ne!(crc8(&bad), good, "flip at byte {byte} bit {bit}");
            }
        }
    }
}
