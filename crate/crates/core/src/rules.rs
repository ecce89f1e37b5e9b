//! Line-oriented text format for implication rules (`*.lnr`).
//!
//! ```text
//! rule    := conj "->" literal
//! conj    := literal ("&" literal)*
//! literal := "~"? IDENT            IDENT = [a-z][a-z0-9_]*
//! ```
//!
//! Whitespace is insignificant and `#` starts a comment.

use std::fmt;

use thiserror::Error;

/// The shipped coin-collector knowledge base.
pub const COIN_COLLECTOR_RULES: &str = include_str!("../../../rules/coin_collector.lnr");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub name: String,
    pub negated: bool,
}

impl Literal {
    pub fn positive(name: impl Into<String>) -> Self {
        Self { name: name.into(), negated: false }
    }

    pub fn negative(name: impl Into<String>) -> Self {
        Self { name: name.into(), negated: true }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("~")?;
        }
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub antecedents: Vec<Literal>,
    pub consequent: Literal,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.antecedents.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{lit}")?;
        }
        write!(f, " -> {}", self.consequent)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Tilde,
    Amp,
    Arrow,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("`{s}`"),
            Token::Tilde => "`~`".into(),
            Token::Amp => "`&`".into(),
            Token::Arrow => "`->`".into(),
        }
    }
}

struct LineParser {
    line: usize,
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end_column: usize,
}

impl LineParser {
    fn err(&self, column: usize, message: impl Into<String>) -> RuleError {
        RuleError { line: self.line, column, message: message.into() }
    }

    fn tokenize(line: usize, text: &str) -> Result<Self, RuleError> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        let err = |column: usize, message: String| RuleError { line, column, message };
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            match c {
                c if c.is_whitespace() => i += 1,
                '~' => {
                    tokens.push((column, Token::Tilde));
                    i += 1;
                }
                '&' => {
                    tokens.push((column, Token::Amp));
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    tokens.push((column, Token::Arrow));
                    i += 2;
                }
                'a'..='z' => {
                    let start = i;
                    while i < chars.len() && matches!(chars[i], 'a'..='z' | '0'..='9' | '_') {
                        i += 1;
                    }
                    tokens.push((column, Token::Ident(chars[start..i].iter().collect())));
                }
                other => return Err(err(column, format!("unexpected character `{other}`"))),
            }
        }
        Ok(Self { line, tokens, pos: 0, end_column: chars.len() + 1 })
    }

    fn peek(&self) -> Option<&(usize, Token)> {
        self.tokens.get(self.pos)
    }

    fn next_column(&self) -> usize {
        self.peek().map_or(self.end_column, |(c, _)| *c)
    }

    fn literal(&mut self, context: &str) -> Result<Literal, RuleError> {
        let mut negated = false;
        if let Some((_, Token::Tilde)) = self.peek() {
            negated = true;
            self.pos += 1;
        }
        match self.tokens.get(self.pos).cloned() {
            Some((_, Token::Ident(name))) => {
                self.pos += 1;
                Ok(Literal { name, negated })
            }
            Some((column, tok)) => Err(self.err(column, format!("expected {context}, found {}", tok.describe()))),
            None => Err(self.err(self.end_column, format!("expected {context}, found end of line"))),
        }
    }

    fn rule(&mut self) -> Result<Rule, RuleError> {
        if let Some((column, Token::Arrow)) = self.peek() {
            return Err(self.err(*column, "empty antecedent"));
        }
        let mut antecedents = vec![self.literal("a literal")?];
        while let Some((_, Token::Amp)) = self.peek() {
            self.pos += 1;
            let column = self.next_column();
            let lit = self.literal("a literal after `&`")?;
            if antecedents.contains(&lit) {
                return Err(self.err(column, format!("duplicate antecedent `{lit}`")));
            }
            antecedents.push(lit);
        }
        match self.peek().cloned() {
            Some((_, Token::Arrow)) => self.pos += 1,
            Some((column, tok)) => {
                return Err(self.err(column, format!("expected `&` or `->`, found {}", tok.describe())))
            }
            None => return Err(self.err(self.end_column, "expected `->`")),
        }
        let consequent = self.literal("a consequent literal")?;
        if let Some((column, tok)) = self.peek() {
            return Err(self.err(*column, format!("unexpected {} after consequent", tok.describe())));
        }
        Ok(Rule { antecedents, consequent })
    }
}

/// One rule per non-empty, non-comment line.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, RuleError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut parser = LineParser::tokenize(idx + 1, content)?;
        rules.push(parser.rule()?);
    }
    Ok(rules)
}

/// Canonical text: one rule per line, each terminated by a newline.
pub fn format_rules(rules: &[Rule]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}

/// The nine coin-collector rules: for each direction a "don't walk back into
/// a known-empty room" rule and a "follow a found exit" rule, plus "take a
/// visible coin".
pub fn default_knowledge() -> Vec<Rule> {
    parse_rules(COIN_COLLECTOR_RULES).expect("shipped rule file parses")
}
