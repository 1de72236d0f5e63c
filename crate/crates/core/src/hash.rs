//! FNV-1a, the one hash used for identifiers, feature hashing and keys.
//!
//! All multi-byte values are fed little-endian so identifiers are identical
//! across platforms.

const OFFSET_32: u32 = 0x811c_9dc5;
const PRIME_32: u32 = 0x0100_0193;
const OFFSET_64: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME_64: u64 = 0x0000_0100_0000_01b3;

/// Incremental 32-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a32(u32);

impl Default for Fnv1a32 {
    fn default() -> Self {
        Self(OFFSET_32)
    }
}

impl Fnv1a32 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(mut self, data: &[u8]) -> Self {
        for &b in data {
            self.0 ^= u32::from(b);
            self.0 = self.0.wrapping_mul(PRIME_32);
        }
        self
    }

    pub fn u32(self, v: u32) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn i32(self, v: i32) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn finish(self) -> u32 {
        self.0
    }
}

/// Incremental 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self(OFFSET_64)
    }
}

impl Fnv1a64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(mut self, data: &[u8]) -> Self {
        for &b in data {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(PRIME_64);
        }
        self
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

/// One-shot 32-bit FNV-1a of a byte string.
pub fn fnv1a32(data: &[u8]) -> u32 {
    Fnv1a32::new().bytes(data).finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference vectors from the FNV specification.
    #[test]
    fn known_vectors() {
        assert_eq!(fnv1a32(b""), 0x811c9dc5);
        assert_eq!(fnv1a32(b"a"), 0xe40c292c);
        assert_eq!(fnv1a32(b"foobar"), 0xbf9cf968);
        assert_eq!(Fnv1a64::new().bytes(b"a").finish(), 0xaf63dc4c8601ec8c);
        assert_eq!(Fnv1a64::new().bytes(b"foobar").finish(), 0x85944171f73967e8);
    }

    #[test]
    fn incremental_matches_one_shot() {
        let h = Fnv1a32::new().bytes(b"foo").bytes(b"bar").finish();
        assert_eq!(h, fnv1a32(b"foobar"));
        assert_eq!(Fnv1a32::new().u32(7).finish(), fnv1a32(&[7, 0, 0, 0]));
    }
}
