use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(Option<i64>),
    Float,
    Str(String),
    Char(char),
    /// Operators and separators. `>` is always emitted alone so that nested
    /// generic closers need no splitting; the parser re-joins shifts.
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokKind,
    pub line: u32,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        matches!(&self.kind, TokKind::Op(o) if *o == op)
    }

    pub fn is_ident(&self, word: &str) -> bool {
        matches!(&self.kind, TokKind::Ident(w) if w == word)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokKind::Ident(w) => Some(w),
            _ => None,
        }
    }
}

const OPS: &[&str] = &[
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", "<<", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", "<", ">", "!",
    "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b' ' | b'\t' | b'\r' | 0x0c => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let open = line;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(ParseError { line: open, message: "unterminated comment".into() });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
            b'"' if text[i..].starts_with("\"\"\"") => {
                let (start, open) = (i, line);
                i += 3;
                let mut value = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(ParseError { line: open, message: "unterminated text block".into() });
                    }
                    if text[i..].starts_with("\"\"\"") {
                        i += 3;
                        break;
                    }
                    let ch = text[i..].chars().next().unwrap();
                    if ch == '\n' {
                        line += 1;
                    }
                    value.push(ch);
                    i += ch.len_utf8();
                }
                toks.push(Token { kind: TokKind::Str(value), line: open, start, end: i });
            }
            b'"' | b'\'' => {
                let start = i;
                let (value, next) = quoted(text, i, line)?;
                i = next;
                let kind = if c == b'"' {
                    TokKind::Str(value)
                } else {
                    let mut chars = value.chars();
                    match (chars.next(), chars.next()) {
                        (Some(ch), None) => TokKind::Char(ch),
                        _ => return Err(ParseError { line, message: "bad character literal".into() }),
                    }
                };
                toks.push(Token { kind, line, start, end: i });
            }
            b'0'..=b'9' => {
                let start = i;
                i = number_end(bytes, i);
                toks.push(Token { kind: number_kind(&text[start..i]), line, start, end: i });
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let start = i;
                i = number_end(bytes, i);
                toks.push(Token { kind: TokKind::Float, line, start, end: i });
            }
            _ if c == b'_' || c == b'$' || c.is_ascii_alphabetic() || c >= 0x80 => {
                let start = i;
                let rest = &text[i..];
                let ch = rest.chars().next().unwrap();
                if c >= 0x80 && !ch.is_alphabetic() {
                    return Err(ParseError { line, message: format!("unexpected character {ch:?}") });
                }
                let len: usize = rest
                    .char_indices()
                    .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_' || *ch == '$'))
                    .map(|(ix, _)| ix)
                    .unwrap_or(rest.len());
                i += len;
                toks.push(Token { kind: TokKind::Ident(text[start..i].to_string()), line, start, end: i });
            }
            _ => {
                let op = OPS
                    .iter()
                    .find(|op| text[i..].starts_with(**op))
                    .ok_or_else(|| ParseError {
                        line,
                        message: format!("unexpected character {:?}", text[i..].chars().next().unwrap()),
                    })?;
                toks.push(Token { kind: TokKind::Op(op), line, start: i, end: i + op.len() });
                i += op.len();
            }
        }
    }
    toks.push(Token { kind: TokKind::Eof, line, start: text.len(), end: text.len() });
    Ok(toks)
}

fn quoted(text: &str, open: usize, line: u32) -> Result<(String, usize), ParseError> {
    let quote = text.as_bytes()[open] as char;
    let mut value = String::new();
    let mut chars = text[open + 1..].char_indices();
    while let Some((ix, ch)) = chars.next() {
        match ch {
            '\n' => break,
            '\\' => {
                let (_, esc) = chars.next().ok_or_else(|| ParseError { line, message: "unterminated literal".into() })?;
                value.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    'b' => '\u{8}',
                    'f' => '\u{c}',
                    's' => ' ',
                    '0'..='7' => char::from(esc.to_digit(8).unwrap() as u8),
                    'u' => {
                        let hex: String = chars.by_ref().take(4).map(|(_, c)| c).collect();
                        u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32).unwrap_or('\u{fffd}')
                    }
                    other => other,
                });
            }
            c if c == quote => return Ok((value, open + 1 + ix + 1)),
            c => value.push(c),
        }
    }
    Err(ParseError { line, message: "unterminated literal".into() })
}

fn number_end(bytes: &[u8], start: usize) -> usize {
    let hex = bytes[start..].len() > 1 && bytes[start] == b'0' && matches!(bytes[start + 1], b'x' | b'X');
    let mut i = start;
    while i < bytes.len() {
        let c = bytes[i];
        let exp_sign = (c == b'+' || c == b'-')
            && i > start
            && if hex { matches!(bytes[i - 1], b'p' | b'P') } else { matches!(bytes[i - 1], b'e' | b'E') };
        if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || exp_sign {
            i += 1;
        } else {
            break;
        }
    }
    i
}

fn number_kind(raw: &str) -> TokKind {
    let s: String = raw.chars().filter(|c| *c != '_').collect();
    let lower = s.to_ascii_lowercase();
    let (radix, digits) = if let Some(h) = lower.strip_prefix("0x") {
        (16, h)
    } else if let Some(b) = lower.strip_prefix("0b") {
        (2, b)
    } else if lower.len() > 1 && lower.starts_with('0') && lower.chars().all(|c| c.is_ascii_digit() || c == 'l') {
        (8, &lower[1..])
    } else {
        (10, lower.as_str())
    };
    if radix == 10 && (digits.contains(['.', 'e']) || digits.ends_with(['f', 'd'])) {
        return TokKind::Float;
    }
    if radix == 16 && digits.contains('p') {
        return TokKind::Float;
    }
    let digits = digits.trim_end_matches('l');
    TokKind::Int(i64::from_str_radix(digits, radix).ok().or_else(|| {
        // hex/binary literals may use the sign bit
        u64::from_str_radix(digits, radix).ok().filter(|_| radix != 10).map(|v| v as i64)
    }))
}
