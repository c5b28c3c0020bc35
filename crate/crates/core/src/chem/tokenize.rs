use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unterminated bracket atom at byte {offset}")]
    UnterminatedBracketAtom { offset: usize },
    #[error("unexpected character '{ch}' at byte {offset}")]
    UnexpectedCharacter { ch: char, offset: usize },
}

/// SMILES split into atom, bond, ring-closure and branch tokens.
///
/// Concatenating the tokens reproduces the input exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            f.write_str(t)?;
        }
        Ok(())
    }
}

pub fn tokenize_smiles(text: &str) -> Result<TokenSequence, TokenizeError> {
    if text.is_empty() {
        return Err(TokenizeError::Empty);
    }
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let len = match bytes[i] {
            b'[' => match bytes[i..].iter().position(|&b| b == b']') {
                Some(p) => p + 1,
                None => return Err(TokenizeError::UnterminatedBracketAtom { offset: i }),
            },
            b'C' if bytes.get(i + 1) == Some(&b'l') => 2,
            b'B' if bytes.get(i + 1) == Some(&b'r') => 2,
            b'%' => {
                if bytes.len() >= i + 3 && bytes[i + 1..i + 3].iter().all(u8::is_ascii_digit) {
                    3
                } else {
                    return Err(TokenizeError::UnexpectedCharacter { ch: '%', offset: i });
                }
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'*' | b'b' | b'c' | b'n'
            | b'o' | b'p' | b's' => 1,
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'.' | b'(' | b')' => 1,
            b'0'..=b'9' => 1,
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(TokenizeError::UnexpectedCharacter { ch, offset: i });
            }
        };
        tokens.push(text[i..i + len].to_string());
        i += len;
    }
    Ok(TokenSequence { tokens })
}
