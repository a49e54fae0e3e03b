use super::lexer::{Lexer, Tok, Token};
use super::{HeaderRecord, StepEntity, StepError, StepModel, StepValue};

/// Parses a complete ISO 10303-21 clear-text file.
pub fn parse_step(input: &[u8]) -> Result<StepModel, StepError> {
    let text = std::str::from_utf8(input)
        .map_err(|e| StepError::MalformedFile(format!("input is not valid UTF-8: {e}")))?;
    Parser::new(text)?.file()
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, StepError> {
        let mut lexer = Lexer::new(text);
        let current = lexer.next_token()?;
        Ok(Parser { lexer, current })
    }

    fn bump(&mut self) -> Result<Token, StepError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn error(&self, message: impl Into<String>) -> StepError {
        self.lexer.error_at(self.current.offset, message)
    }

    fn unexpected(&self, expected: &str) -> StepError {
        if self.current.tok == Tok::Eof {
            self.error(format!("unexpected end of input, expected {expected}"))
        } else {
            self.error(format!("expected {expected}, found {:?}", self.current.tok))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), StepError> {
        if self.current.tok == tok {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.current.tok, Tok::Keyword(k) if k.eq_ignore_ascii_case(kw))
    }

    fn keyword_statement(&mut self, kw: &str) -> Result<(), StepError> {
        if !self.at_keyword(kw) {
            return Err(self.unexpected(kw));
        }
        self.bump()?;
        self.expect(Tok::Semi, "';'")
    }

    fn file(mut self) -> Result<StepModel, StepError> {
        if !self.at_keyword("ISO-10303-21") {
            return Err(StepError::MalformedFile(
                "missing ISO-10303-21 sentinel".into(),
            ));
        }
        self.keyword_statement("ISO-10303-21")?;
        let mut model = StepModel::new();
        self.keyword_statement("HEADER")?;
        while !self.at_keyword("ENDSEC") {
            model.header.push(self.header_record()?);
        }
        self.keyword_statement("ENDSEC")?;

        let mut saw_data = false;
        while self.at_keyword("DATA") {
            saw_data = true;
            self.bump()?;
            // IFC4 permits DATA('name', ('schema'));
            if self.current.tok == Tok::Open {
                self.parameter_list()?;
            }
            self.expect(Tok::Semi, "';'")?;
            while !self.at_keyword("ENDSEC") {
                self.record(&mut model)?;
            }
            self.keyword_statement("ENDSEC")?;
        }
        if !saw_data {
            return Err(StepError::MalformedFile("missing DATA section".into()));
        }
        if !self.at_keyword("END-ISO-10303-21") {
            return Err(self.unexpected("END-ISO-10303-21"));
        }
        self.keyword_statement("END-ISO-10303-21")?;
        Ok(model)
    }

    fn header_record(&mut self) -> Result<HeaderRecord, StepError> {
        let name = match &self.current.tok {
            Tok::Keyword(k) => k.to_ascii_uppercase(),
            _ => return Err(self.unexpected("header record or ENDSEC")),
        };
        self.bump()?;
        let params = self.parameter_list()?;
        self.expect(Tok::Semi, "';'")?;
        Ok(HeaderRecord { name, params })
    }

    fn record(&mut self, model: &mut StepModel) -> Result<(), StepError> {
        let start = self.current.offset;
        let id = match self.current.tok {
            Tok::Ref(id) => id,
            _ => return Err(self.unexpected("entity instance '#id=' or ENDSEC")),
        };
        self.bump()?;
        self.expect(Tok::Equals, "'='")?;
        let type_name = match &self.current.tok {
            Tok::Keyword(k) => k.to_ascii_uppercase(),
            Tok::Open => return Err(self.error("complex entity instances are not supported")),
            _ => return Err(self.unexpected("entity type name")),
        };
        if !type_name
            .bytes()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == b'_')
        {
            return Err(self.error(format!("invalid entity type name '{type_name}'")));
        }
        self.bump()?;
        let attributes = self.parameter_list()?;
        self.expect(Tok::Semi, "';'")?;
        if model.contains(id) {
            let (line, column) = self.lexer.position(start);
            return Err(StepError::DuplicateId { id, line, column });
        }
        model.insert(StepEntity {
            id,
            type_name,
            attributes,
        });
        Ok(())
    }

    /// `( value, value, ... )`, possibly empty.
    fn parameter_list(&mut self) -> Result<Vec<StepValue>, StepError> {
        self.expect(Tok::Open, "'('")?;
        let mut values = Vec::new();
        if self.current.tok == Tok::Close {
            self.bump()?;
            return Ok(values);
        }
        loop {
            values.push(self.value()?);
            match self.current.tok {
                Tok::Comma => {
                    self.bump()?;
                }
                Tok::Close => {
                    self.bump()?;
                    return Ok(values);
                }
                _ => return Err(self.unexpected("',' or ')'")),
            }
        }
    }

    fn value(&mut self) -> Result<StepValue, StepError> {
        let value = match &self.current.tok {
            Tok::Integer(i) => StepValue::Integer(*i),
            Tok::Real(r) => StepValue::Real(*r),
            Tok::String(s) => StepValue::String(s.clone()),
            Tok::Enum(e) => StepValue::Enum(e.clone()),
            Tok::Ref(id) => StepValue::Ref(*id),
            Tok::Dollar => StepValue::Null,
            Tok::Star => StepValue::Derived,
            Tok::Open => return self.parameter_list().map(StepValue::List),
            Tok::Keyword(k) => {
                let name = k.to_ascii_uppercase();
                self.bump()?;
                self.expect(Tok::Open, "'(' after typed parameter name")?;
                let inner = self.value()?;
                self.expect(Tok::Close, "')' closing typed parameter")?;
                return Ok(StepValue::Typed(name, Box::new(inner)));
            }
            _ => return Err(self.unexpected("parameter value")),
        };
        self.bump()?;
        Ok(value)
    }
}
