//! EMBX files written by an independent writer (a few lines of Python using
//! `struct` and `hashlib`) must load, and re-export byte for byte.

use dlab_core::embed::{EmbedError, EmbeddingMatrix};

const FIXTURE: &[u8] = include_bytes!("fixtures/two_rows.embx");

#[test]
fn reads_foreign_file() {
    let m = EmbeddingMatrix::read_embx(FIXTURE).unwrap();
    assert_eq!(m.ids(), ["post:a", "post:b"]);
    assert_eq!(m.dim(), 3);
    assert_eq!(m.row(0), [0.6, 0.8, 0.0]);
    assert_eq!(m.row(1), [1.0, -2.5, 0.125]);
    assert!(!m.is_normalized());
}

#[test]
fn rewrite_matches_foreign_bytes() {
    let m = EmbeddingMatrix::read_embx(FIXTURE).unwrap();
    let mut out = Vec::new();
    m.write_embx(&mut out).unwrap();
    assert_eq!(out, FIXTURE);
}

#[test]
fn header_layout() {
    assert_eq!(&FIXTURE[..4], b"EMBX");
    assert_eq!(u16::from_le_bytes([FIXTURE[4], FIXTURE[5]]), 1);
    assert_eq!(u32::from_le_bytes(FIXTURE[6..10].try_into().unwrap()), 3);
    assert_eq!(u64::from_le_bytes(FIXTURE[10..18].try_into().unwrap()), 2);
    assert_eq!(FIXTURE.len(), 18 + 6 * 4 + "post:a\npost:b\n".len() + 8);
}

#[test]
fn any_flipped_byte_is_rejected() {
    for i in 0..FIXTURE.len() {
        let mut b = FIXTURE.to_vec();
        b[i] ^= 0x01;
        assert!(EmbeddingMatrix::read_embx(&b[..]).is_err(), "byte {i} flip accepted");
    }
}

#[test]
fn truncation_is_rejected() {
    for n in 0..FIXTURE.len() {
        let r = EmbeddingMatrix::read_embx(&FIXTURE[..n]);
        assert!(r.is_err(), "prefix of {n} bytes accepted");
    }
    assert!(matches!(EmbeddingMatrix::read_embx(&b"NOPE"[..]), Err(EmbedError::BadMagic)));
}
