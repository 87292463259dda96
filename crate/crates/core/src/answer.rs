//! SLDP answer expressions: sets, lists, dictionaries, points, numbers and
//! bare strings, compared with numeric tolerance.
//!
//! Set equality is mutual inclusion under tolerant element equality, not a
//! bijection, so `<0, 0.02>` equals `<0.01>` at the default tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub enum SldpValue {
    Number(f64),
    Str(String),
    Point([f64; 3]),
    List(Vec<SldpValue>),
    Set(Vec<SldpValue>),
    Dict(BTreeMap<String, SldpValue>),
}

/// The shape a question asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SldpKind {
    Number,
    String,
    Point,
    List,
    Set,
    Dict,
}

impl SldpKind {
    pub const ALL: [SldpKind; 6] = [
        SldpKind::Number,
        SldpKind::String,
        SldpKind::Point,
        SldpKind::List,
        SldpKind::Set,
        SldpKind::Dict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SldpKind::Number => "number",
            SldpKind::String => "string",
            SldpKind::Point => "point",
            SldpKind::List => "list",
            SldpKind::Set => "set",
            SldpKind::Dict => "dict",
        }
    }
}

impl fmt::Display for SldpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SldpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SldpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown answer kind `{s}` (expected number, string, point, list, set or dict)"))
    }
}

impl SldpValue {
    pub fn kind(&self) -> SldpKind {
        match self {
            SldpValue::Number(_) => SldpKind::Number,
            SldpValue::Str(_) => SldpKind::String,
            SldpValue::Point(_) => SldpKind::Point,
            SldpValue::List(_) => SldpKind::List,
            SldpValue::Set(_) => SldpKind::Set,
            SldpValue::Dict(_) => SldpKind::Dict,
        }
    }
}

/// Tolerances for numbers (absolute difference) and points (l-infinity distance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            epsilon: 0.01,
            delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SldpError {
    #[error("SLDP syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("duplicate dictionary key `{key}` at offset {offset}")]
    DuplicateKey { key: String, offset: usize },
}

pub fn parse_sldp(text: &str) -> Result<SldpValue, SldpError> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let v = p.expression()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.syntax("trailing input after expression"));
    }
    Ok(v)
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> SldpError {
        SldpError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), SldpError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }

    fn expression(&mut self) -> Result<SldpValue, SldpError> {
        match self.peek() {
            Some(b'<') => Ok(SldpValue::Set(self.sequence(b'<', b'>')?)),
            Some(b'[') => Ok(SldpValue::List(self.sequence(b'[', b']')?)),
            Some(b'{') => self.dict(),
            Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.') => Ok(SldpValue::Number(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.cname()?;
                if name.eq_ignore_ascii_case("point") && self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut coords = [0.0; 3];
                    for c in &mut coords {
                        if self.peek() == Some(b',') {
                            return Err(self.syntax("point coordinates are separated by spaces, not commas"));
                        }
                        *c = self.number()?;
                    }
                    self.expect(b')')?;
                    return Ok(SldpValue::Point(coords));
                }
                Ok(SldpValue::Str(name))
            }
            Some(_) => Err(self.syntax("expected an SLDP expression")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn sequence(&mut self, open: u8, close: u8) -> Result<Vec<SldpValue>, SldpError> {
        self.expect(open)?;
        let mut out = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.expression()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.syntax(format!("expected `,` or `{}`", close as char))),
            }
        }
    }

    fn dict(&mut self) -> Result<SldpValue, SldpError> {
        self.expect(b'{')?;
        let mut out = BTreeMap::new();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(SldpValue::Dict(out));
        }
        loop {
            self.skip_ws();
            let key_at = self.pos;
            let key = self.cname()?;
            self.expect(b':')?;
            let value = self.expression()?;
            if out.insert(key.clone(), value).is_some() {
                return Err(SldpError::DuplicateKey { key, offset: key_at });
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(SldpValue::Dict(out));
                }
                _ => return Err(self.syntax("expected `,` or `}`")),
            }
        }
    }

    /// Identifier: a letter or underscore, then letters, digits, underscores.
    fn cname(&mut self) -> Result<String, SldpError> {
        self.skip_ws();
        let start = self.pos;
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => self.pos += 1,
            _ => return Err(self.syntax("expected a name")),
        }
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        Ok(self.text[start..self.pos].to_string())
    }

    /// Signed integer or float, with optional exponent.
    fn number(&mut self) -> Result<f64, SldpError> {
        self.skip_ws();
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
            i += 1;
        }
        let int_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mut digits = i - int_start;
        if i < b.len() && b[i] == b'.' {
            i += 1;
            let frac = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            digits += i - frac;
        }
        if digits == 0 {
            self.pos = start;
            return Err(self.syntax("expected a number"));
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
                j += 1;
            }
            let exp = j;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp {
                i = j;
            }
        }
        if i < b.len() && (b[i].is_ascii_alphabetic() || b[i] == b'_') {
            self.pos = i;
            return Err(self.syntax("a name cannot start with a digit"));
        }
        let value: f64 = self.text[start..i]
            .parse()
            .map_err(|_| self.syntax("malformed number"))?;
        if !value.is_finite() {
            return Err(self.syntax("number out of range"));
        }
        self.pos = i;
        Ok(value)
    }
}

/// Absolute comparison with a few ulps of slack so that decimal boundary
/// cases such as 0.02 vs 0.01 at epsilon 0.01 stay inclusive.
fn within(a: f64, b: f64, tol: f64) -> bool {
    let slack = 4.0 * f64::EPSILON * 1f64.max(a.abs()).max(b.abs());
    (a - b).abs() <= tol + slack
}

pub fn sldp_equal(a: &SldpValue, b: &SldpValue, tol: &Tolerance) -> bool {
    use SldpValue as V;
    match (a, b) {
        (V::Number(x), V::Number(y)) => within(*x, *y, tol.epsilon),
        (V::Str(x), V::Str(y)) => x == y,
        (V::Point(p), V::Point(q)) => p.iter().zip(q).all(|(x, y)| within(*x, *y, tol.delta)),
        (V::List(xs), V::List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| sldp_equal(x, y, tol)),
        (V::Set(xs), V::Set(ys)) => set_included(xs, ys, tol) && set_included(ys, xs, tol),
        (V::Dict(xs), V::Dict(ys)) => {
            xs.len() == ys.len() && xs.iter().all(|(k, v)| ys.get(k).is_some_and(|w| sldp_equal(v, w, tol)))
        }
        _ => false,
    }
}

fn set_included(xs: &[SldpValue], ys: &[SldpValue], tol: &Tolerance) -> bool {
    xs.iter().all(|x| ys.iter().any(|y| sldp_equal(x, y, tol)))
}

pub fn render_sldp(v: &SldpValue) -> String {
    v.to_string()
}

impl fmt::Display for SldpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SldpValue::Number(x) => write!(f, "{x}"),
            SldpValue::Str(s) => f.write_str(s),
            SldpValue::Point([x, y, z]) => write!(f, "POINT({x} {y} {z})"),
            SldpValue::List(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            SldpValue::Set(items) => {
                let mut parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                parts.sort();
                write!(f, "<{}>", parts.join(", "))
            }
            SldpValue::Dict(map) => {
                let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

impl FromStr for SldpValue {
    type Err = SldpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sldp(s)
    }
}
