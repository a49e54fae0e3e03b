use super::StepError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Keyword or entity type name, case preserved.
    Keyword(String),
    Integer(i64),
    Real(f64),
    String(String),
    Enum(String),
    Ref(u64),
    Dollar,
    Star,
    Open,
    Close,
    Comma,
    Semi,
    Equals,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    /// Byte offset of the first character.
    pub offset: usize,
}

pub(crate) struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    /// 1-based (line, column) of a byte offset.
    pub fn position(&self, offset: usize) -> (usize, usize) {
        let upto = &self.src[..offset.min(self.src.len())];
        let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = upto.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        (line, offset - line_start + 1)
    }

    pub fn error_at(&self, offset: usize, message: impl Into<String>) -> StepError {
        let (line, column) = self.position(offset);
        StepError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) -> Result<(), StepError> {
        loop {
            match self.peek_byte() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    let start = self.pos;
                    self.pos += 2;
                    loop {
                        match self.peek_byte() {
                            None => return Err(self.error_at(start, "unterminated comment")),
                            Some(b'*') if self.src.get(self.pos + 1) == Some(&b'/') => {
                                self.pos += 2;
                                break;
                            }
                            Some(_) => self.pos += 1,
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    pub fn next_token(&mut self) -> Result<Token, StepError> {
        self.skip_trivia()?;
        let offset = self.pos;
        let Some(b) = self.peek_byte() else {
            return Ok(Token {
                tok: Tok::Eof,
                offset,
            });
        };
        let simple = match b {
            b'(' => Some(Tok::Open),
            b')' => Some(Tok::Close),
            b',' => Some(Tok::Comma),
            b';' => Some(Tok::Semi),
            b'=' => Some(Tok::Equals),
            b'$' => Some(Tok::Dollar),
            b'*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok(Token { tok, offset });
        }
        let tok = match b {
            b'\'' => self.string(offset)?,
            b'#' => self.reference(offset)?,
            b'.' => {
                // `.5` style reals are not valid STEP but `.T.` enums are.
                if self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|c| c.is_ascii_alphabetic() || *c == b'_')
                {
                    self.enumeration(offset)?
                } else {
                    return Err(self.error_at(offset, "unexpected '.'"));
                }
            }
            b'+' | b'-' | b'0'..=b'9' => self.number(offset)?,
            b'"' => return Err(self.error_at(offset, "binary literals are not supported")),
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'!' => self.keyword(),
            c => return Err(self.error_at(offset, format!("unexpected character '{}'", c as char))),
        };
        Ok(Token { tok, offset })
    }

    fn string(&mut self, offset: usize) -> Result<Tok, StepError> {
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.peek_byte() {
                None => return Err(self.error_at(offset, "unterminated string")),
                Some(b'\'') => {
                    if self.src.get(self.pos + 1) == Some(&b'\'') {
                        out.push(b'\'');
                        self.pos += 2;
                    } else {
                        self.pos += 1;
                        break;
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        // Input was valid UTF-8 and we only split at ASCII quotes.
        Ok(Tok::String(String::from_utf8(out).expect("utf-8 input")))
    }

    fn reference(&mut self, offset: usize) -> Result<Tok, StepError> {
        self.pos += 1;
        let start = self.pos;
        while self.peek_byte().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match digits.parse::<u64>() {
            Ok(0) => Err(self.error_at(offset, "entity id must be positive")),
            Ok(id) => Ok(Tok::Ref(id)),
            Err(_) => Err(self.error_at(offset, "expected entity id digits after '#'")),
        }
    }

    fn enumeration(&mut self, offset: usize) -> Result<Tok, StepError> {
        self.pos += 1;
        let start = self.pos;
        while self
            .peek_byte()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        if self.peek_byte() != Some(b'.') {
            return Err(self.error_at(offset, "unterminated enumeration"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        self.pos += 1;
        Ok(Tok::Enum(text.to_ascii_uppercase()))
    }

    fn number(&mut self, offset: usize) -> Result<Tok, StepError> {
        let start = self.pos;
        if matches!(self.peek_byte(), Some(b'+' | b'-')) {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.peek_byte().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(self.error_at(offset, "expected digits"));
        }
        let mut is_real = false;
        if self.peek_byte() == Some(b'.') {
            is_real = true;
            self.pos += 1;
            while self.peek_byte().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek_byte(), Some(b'E' | b'e')) {
            is_real = true;
            self.pos += 1;
            if matches!(self.peek_byte(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while self.peek_byte().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == exp_start {
                return Err(self.error_at(offset, "malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if is_real {
            // Rust does not accept a trailing '.' before the exponent ("1.E3").
            let normalized = text.replacen(".E", ".0E", 1).replacen(".e", ".0e", 1);
            normalized
                .parse::<f64>()
                .map(Tok::Real)
                .map_err(|_| self.error_at(offset, format!("invalid real '{text}'")))
        } else {
            text.parse::<i64>()
                .map(Tok::Integer)
                .map_err(|_| self.error_at(offset, format!("integer out of range '{text}'")))
        }
    }

    fn keyword(&mut self) -> Tok {
        let start = self.pos;
        self.pos += 1;
        while self
            .peek_byte()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-')
        {
            self.pos += 1;
        }
        Tok::Keyword(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }
}
