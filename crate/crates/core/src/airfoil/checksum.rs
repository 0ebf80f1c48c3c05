use super::AirfoilState;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_extend(FNV_OFFSET, bytes)
}

fn fnv1a64_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn dat_hash(name: &str, values: &[f64]) -> u64 {
    let mut h = fnv1a64_extend(FNV_OFFSET, name.as_bytes());
    for v in values {
        h = fnv1a64_extend(h, &v.to_le_bytes());
    }
    h
}

/// Per-dat FNV-1a over the name followed by the little-endian values,
/// combined with a wrapping sum so the order of dats does not matter.
pub fn state_checksum(s: &AirfoilState) -> u64 {
    let mut parts = vec![
        dat_hash("p_x", &s.x),
        dat_hash("p_q", &s.q),
        dat_hash("p_qold", &s.qold),
        dat_hash("p_res", &s.res),
        dat_hash("p_adt", &s.adt),
    ];
    if let Some(rms) = s.rms {
        parts.push(dat_hash("rms", &[rms]));
    }
    parts.into_iter().fold(0u64, u64::wrapping_add)
}
