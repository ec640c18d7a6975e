use std::collections::BTreeSet;

use super::PredictError;

/// Index of a token in a [`Dictionary`].
pub type TokenId = u32;

/// A token sequence `t`; every id is below the dictionary size.
pub type TokenSequence = Vec<TokenId>;

/// The ordered token set `D` shared by encoder and decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dictionary {
    /// All 256 byte values; text is tokenized as its UTF-8 bytes.
    Bytes,
    /// An explicit, sorted character alphabet.
    Chars(Vec<char>),
}

impl Dictionary {
    /// Sorted distinct characters of `text`. A one-character alphabet is
    /// padded with `'\0'` so that the dictionary always has two symbols.
    pub fn chars_of(text: &str) -> Self {
        let mut set: BTreeSet<char> = text.chars().collect();
        while set.len() < 2 {
            let pad = ['\0', '\u{1}'].into_iter().find(|c| !set.contains(c)).unwrap();
            set.insert(pad);
        }
        Dictionary::Chars(set.into_iter().collect())
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self, PredictError> {
        let set: BTreeSet<char> = chars.into_iter().collect();
        if set.len() < 2 {
            return Err(PredictError::Invalid("a dictionary needs at least two symbols".into()));
        }
        Ok(Dictionary::Chars(set.into_iter().collect()))
    }

    /// Number of tokens `tau`.
    pub fn len(&self) -> usize {
        match self {
            Dictionary::Bytes => 256,
            Dictionary::Chars(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSequence, PredictError> {
        match self {
            Dictionary::Bytes => Ok(text.bytes().map(TokenId::from).collect()),
            Dictionary::Chars(alphabet) => text
                .chars()
                .map(|c| {
                    alphabet
                        .binary_search(&c)
                        .map(|i| i as TokenId)
                        .map_err(|_| PredictError::UnknownSymbol(c))
                })
                .collect(),
        }
    }

    pub fn detokenize(&self, tokens: &[TokenId]) -> Result<String, PredictError> {
        self.check(tokens)?;
        match self {
            Dictionary::Bytes => {
                let bytes: Vec<u8> = tokens.iter().map(|&t| t as u8).collect();
                String::from_utf8(bytes).map_err(|e| PredictError::InvalidText(e.utf8_error().valid_up_to()))
            }
            Dictionary::Chars(alphabet) => Ok(tokens.iter().map(|&t| alphabet[t as usize]).collect()),
        }
    }

    /// Like [`detokenize`](Self::detokenize) but replaces undecodable bytes
    /// with U+FFFD instead of failing; used on possibly corrupted output.
    pub fn detokenize_lossy(&self, tokens: &[TokenId]) -> String {
        match self {
            Dictionary::Bytes => {
                let bytes: Vec<u8> = tokens.iter().map(|&t| t as u8).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            Dictionary::Chars(alphabet) => tokens
                .iter()
                .map(|&t| alphabet.get(t as usize).copied().unwrap_or('\u{fffd}'))
                .collect(),
        }
    }

    pub fn check(&self, tokens: &[TokenId]) -> Result<(), PredictError> {
        let tau = self.len();
        match tokens.iter().find(|&&t| t as usize >= tau) {
            Some(&t) => Err(PredictError::TokenOutOfRange { token: t, tau }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_roundtrip() {
        let d = Dictionary::from_chars(['a', 'b']).unwrap();
        let t = d.tokenize("ab").unwrap();
        assert_eq!(t, vec![0, 1]);
        assert_eq!(d.detokenize(&t).unwrap(), "ab");
    }

    #[test]
    fn empty_string() {
        assert!(Dictionary::Bytes.tokenize("").unwrap().is_empty());
        assert_eq!(Dictionary::Bytes.detokenize(&[]).unwrap(), "");
    }

    #[test]
    fn byte_roundtrip_unicode() {
        let s = "Grüße, Parlament €";
        let d = Dictionary::Bytes;
        assert_eq!(d.detokenize(&d.tokenize(s).unwrap()).unwrap(), s);
    }

    #[test]
    fn out_of_range_and_unknown() {
        let d = Dictionary::from_chars(['a', 'b']).unwrap();
        assert!(matches!(d.detokenize(&[2]), Err(PredictError::TokenOutOfRange { token: 2, tau: 2 })));
        assert!(matches!(d.tokenize("c"), Err(PredictError::UnknownSymbol('c'))));
        assert!(Dictionary::from_chars(['a']).is_err());
    }

    #[test]
    fn single_char_text_is_padded() {
        let d = Dictionary::chars_of("aaaa");
        assert_eq!(d.len(), 2);
        assert_eq!(d.tokenize("aa").unwrap(), vec![1, 1]);
    }
}
