//! Minimal FITS reader for single 2-D primary HDUs.
//!
//! Headers are 80-byte ASCII cards packed into 2880-byte blocks and closed
//! by an `END` card. The data unit follows on the next block boundary and is
//! stored big-endian. Only the primary HDU is read; extensions are ignored.

use thiserror::Error;

use super::{ImgError, PixelGrid};

pub const BLOCK_LEN: usize = 2880;
pub const CARD_LEN: usize = 80;

#[derive(Debug, Error, PartialEq)]
pub enum FitsError {
    #[error("not a FITS stream: first card must be `SIMPLE = T`, found {0:?}")]
    NotFits(String),
    #[error("malformed header card at byte {offset}: {reason} ({card:?})")]
    MalformedCard { offset: usize, card: String, reason: &'static str },
    #[error("header ended at byte {0} before an END card")]
    MissingEnd(usize),
    #[error("required keyword {0} is missing")]
    MissingKeyword(&'static str),
    #[error("unsupported BITPIX {0} (expected 8, 16, 32, -32 or -64)")]
    UnsupportedBitpix(i64),
    #[error("NAXIS = {0}, only 2-D images are supported")]
    UnsupportedNaxis(i64),
    #[error("invalid axis length {keyword} = {value}")]
    BadAxis { keyword: &'static str, value: i64 },
    #[error("data unit truncated at byte {offset}: need {expected} bytes, {available} available")]
    Truncated { offset: usize, expected: usize, available: usize },
    #[error(transparent)]
    Grid(#[from] ImgError),
}

/// Parsed value of a header card.
#[derive(Debug, Clone, PartialEq)]
pub enum CardValue {
    Logical(bool),
    Integer(i64),
    Float(f64),
    Text(String),
    /// Commentary card or keyword without a value.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Card {
    pub keyword: String,
    pub value: CardValue,
    /// Byte offset of the card in the stream.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitsHeader {
    pub cards: Vec<Card>,
    /// Byte offset where the data unit starts.
    pub data_offset: usize,
}

impl FitsHeader {
    pub fn get(&self, keyword: &str) -> Option<&Card> {
        self.cards.iter().find(|c| c.keyword == keyword)
    }

    fn integer(&self, keyword: &'static str) -> Result<Option<i64>, FitsError> {
        match self.get(keyword) {
            None => Ok(None),
            Some(Card { value: CardValue::Integer(v), .. }) => Ok(Some(*v)),
            Some(card) => Err(malformed(card, "expected an integer value")),
        }
    }

    fn required_integer(&self, keyword: &'static str) -> Result<i64, FitsError> {
        self.integer(keyword)?.ok_or(FitsError::MissingKeyword(keyword))
    }

    fn real(&self, keyword: &'static str) -> Result<Option<f64>, FitsError> {
        match self.get(keyword) {
            None => Ok(None),
            Some(Card { value: CardValue::Integer(v), .. }) => Ok(Some(*v as f64)),
            Some(Card { value: CardValue::Float(v), .. }) => Ok(Some(*v)),
            Some(card) => Err(malformed(card, "expected a numeric value")),
        }
    }
}

fn malformed(card: &Card, reason: &'static str) -> FitsError {
    FitsError::MalformedCard { offset: card.offset, card: card.keyword.clone(), reason }
}

/// Parses the primary header, stopping at the `END` card.
pub fn parse_header(bytes: &[u8]) -> Result<FitsHeader, FitsError> {
    let mut cards = Vec::new();
    let mut offset = 0;
    loop {
        if offset + CARD_LEN > bytes.len() {
            if offset == 0 {
                return Err(FitsError::NotFits(String::from_utf8_lossy(bytes).into_owned()));
            }
            return Err(FitsError::MissingEnd(offset));
        }
        let raw = &bytes[offset..offset + CARD_LEN];
        let card = parse_card(raw, offset)?;
        if offset == 0 && !(card.keyword == "SIMPLE" && card.value == CardValue::Logical(true)) {
            return Err(FitsError::NotFits(String::from_utf8_lossy(raw).trim_end().to_string()));
        }
        offset += CARD_LEN;
        if card.keyword == "END" {
            break;
        }
        cards.push(card);
    }
    let data_offset = offset.div_ceil(BLOCK_LEN) * BLOCK_LEN;
    Ok(FitsHeader { cards, data_offset })
}

fn parse_card(raw: &[u8], offset: usize) -> Result<Card, FitsError> {
    let text_err = |reason| FitsError::MalformedCard {
        offset,
        card: String::from_utf8_lossy(raw).trim_end().to_string(),
        reason,
    };
    if raw.iter().any(|&b| !(0x20..=0x7e).contains(&b)) {
        return Err(text_err("non-printable byte in card"));
    }
    // Every byte is printable ASCII, so this cannot fail.
    let text = std::str::from_utf8(raw).expect("ascii card");
    let keyword = text[..8].trim_end();
    if keyword.bytes().any(|b| !(b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'-' || b == b'_')) {
        return Err(text_err("invalid keyword characters"));
    }
    let keyword = keyword.to_string();
    let value = if &text[8..10] == "= " && !matches!(keyword.as_str(), "COMMENT" | "HISTORY" | "") {
        parse_value(&text[10..]).ok_or_else(|| text_err("unparsable value"))?
    } else {
        CardValue::None
    };
    Ok(Card { keyword, value, offset })
}

fn parse_value(field: &str) -> Option<CardValue> {
    let field = field.trim_start();
    if let Some(rest) = field.strip_prefix('\'') {
        // Quoted string; '' is an escaped quote.
        let mut out = String::new();
        let mut chars = rest.chars().peekable();
        while let Some(c) = chars.next() {
            if c == '\'' {
                if chars.peek() == Some(&'\'') {
                    chars.next();
                    out.push('\'');
                } else {
                    return Some(CardValue::Text(out.trim_end().to_string()));
                }
            } else {
                out.push(c);
            }
        }
        return None;
    }
    let token = field.split('/').next().unwrap_or("").trim();
    match token {
        "" => Some(CardValue::None),
        "T" => Some(CardValue::Logical(true)),
        "F" => Some(CardValue::Logical(false)),
        _ => {
            if let Ok(i) = token.parse::<i64>() {
                return Some(CardValue::Integer(i));
            }
            token.replace(['D', 'd'], "E").parse::<f64>().ok().map(CardValue::Float)
        }
    }
}

/// Reads the primary image of a FITS stream as floats with BSCALE/BZERO
/// applied. Non-finite pixels are replaced by the frame's finite minimum.
pub fn read_fits(bytes: &[u8]) -> Result<PixelGrid, FitsError> {
    let header = parse_header(bytes)?;
    let bitpix = header.required_integer("BITPIX")?;
    let sample_len = match bitpix {
        8 => 1,
        16 => 2,
        32 => 4,
        -32 => 4,
        -64 => 8,
        other => return Err(FitsError::UnsupportedBitpix(other)),
    };
    let naxis = header.required_integer("NAXIS")?;
    if naxis != 2 {
        return Err(FitsError::UnsupportedNaxis(naxis));
    }
    let width = axis(&header, "NAXIS1")?;
    let height = axis(&header, "NAXIS2")?;
    let bscale = header.real("BSCALE")?.unwrap_or(1.0);
    let bzero = header.real("BZERO")?.unwrap_or(0.0);

    let expected = width * height * sample_len;
    let start = header.data_offset;
    let available = bytes.len().saturating_sub(start);
    if available < expected {
        return Err(FitsError::Truncated { offset: start, expected, available });
    }
    let data = &bytes[start..start + expected];
    let raw: Vec<f64> = match bitpix {
        8 => data.iter().map(|&b| f64::from(b)).collect(),
        16 => data
            .chunks_exact(2)
            .map(|c| f64::from(i16::from_be_bytes([c[0], c[1]])))
            .collect(),
        32 => data
            .chunks_exact(4)
            .map(|c| f64::from(i32::from_be_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        -32 => data
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_be_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        _ => data
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    };
    let values = if bscale == 1.0 && bzero == 0.0 {
        raw
    } else {
        raw.into_iter().map(|v| bzero + bscale * v).collect()
    };
    let mut grid = PixelGrid::new(width, height, values)?;
    grid.replace_non_finite()?;
    Ok(grid)
}

fn axis(header: &FitsHeader, keyword: &'static str) -> Result<usize, FitsError> {
    let value = header.required_integer(keyword)?;
    if value < 1 {
        return Err(FitsError::BadAxis { keyword, value });
    }
    Ok(value as usize)
}

/// Writes a grid as a BITPIX = -64 primary HDU.
pub fn write_fits_f64(grid: &PixelGrid) -> Vec<u8> {
    let cards = [
        format!("{:<8}= {:>20}", "SIMPLE", "T"),
        format!("{:<8}= {:>20}", "BITPIX", -64),
        format!("{:<8}= {:>20}", "NAXIS", 2),
        format!("{:<8}= {:>20}", "NAXIS1", grid.width()),
        format!("{:<8}= {:>20}", "NAXIS2", grid.height()),
        "END".to_string(),
    ];
    let mut out = Vec::with_capacity(BLOCK_LEN + grid.values().len() * 8);
    for card in &cards {
        out.extend_from_slice(format!("{card:<80}").as_bytes());
    }
    out.resize(out.len().div_ceil(BLOCK_LEN) * BLOCK_LEN, b' ');
    for v in grid.values() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.resize(out.len().div_ceil(BLOCK_LEN) * BLOCK_LEN, 0);
    out
}
