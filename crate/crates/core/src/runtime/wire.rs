//! Bit-exact payload encoding. Fields are written least significant bit first.

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `bits` bits of `value`.
    pub fn put(&mut self, value: u128, bits: u32) {
        assert!(bits == 128 || value >> bits == 0, "value {value} wider than {bits} bits");
        for i in 0..bits {
            if self.len % 8 == 0 {
                self.bytes.push(0);
            }
            if value >> i & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (self.len % 8);
            }
            self.len += 1;
        }
    }

    pub fn put_bool(&mut self, b: bool) {
        self.put(u128::from(b), 1);
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn get(&mut self, bits: u32) -> u128 {
        let mut v = 0u128;
        for i in 0..bits {
            let byte = self.bytes[(self.pos / 8) as usize];
            v |= u128::from(byte >> (self.pos % 8) & 1) << i;
            self.pos += 1;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut w = BitWriter::new();
        w.put(5, 3);
        w.put(0, 2);
        w.put(u64::MAX as u128, 64);
        w.put_bool(true);
        assert_eq!(w.len(), 70);
        assert_eq!(w.bytes()[0] & 0b111, 5);
        let mut r = BitReader::new(w.bytes());
        assert_eq!(r.get(3), 5);
        assert_eq!(r.get(2), 0);
        assert_eq!(r.get(64), u64::MAX as u128);
        assert_eq!(r.get(1), 1);
    }

    #[test]
    #[should_panic]
    fn rejects_wide_value() {
        BitWriter::new().put(8, 3);
    }
}
