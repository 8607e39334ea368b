//! Reading and writing discrete Bayesian networks in BIF format.
//!
//! The supported subset: a `network` block, `variable` blocks declaring
//! `type discrete [ r ] { states }`, and `probability` blocks holding
//! either a flat `table` listing or one parenthesized row per parent
//! configuration. Comments and `property` lines are ignored. Parent
//! configurations index row major with the first declared parent most
//! significant, consistent with [`crate::data::Dataset::count_family`].

use crate::data::{Schema, SchemaVariable, MAX_CARDINALITY};
use crate::graph::{Dag, OperationError};
use thiserror::Error;

/// Row sums within this distance of 1 are kept verbatim.
pub const ROW_SUM_KEEP: f64 = 1e-6;
/// Row sums off by more than `ROW_SUM_KEEP` but at most this much are
/// renormalized with a warning. Anything worse is an error.
pub const ROW_SUM_RENORMALIZE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

/// Conditional probability table of one variable. `rows[config][k]` is
/// P(child = k | parent configuration `config`); a parentless variable
/// has exactly one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: usize,
    pub parents: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

/// A discrete Bayesian network: variables, structure, and one CPT per
/// variable (indexed by variable).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteNetwork {
    pub name: String,
    variables: Vec<Variable>,
    dag: Dag,
    cpts: Vec<Cpt>,
}

/// Result of a parse: the network plus any renormalization warnings.
#[derive(Clone, Debug)]
pub struct ParseOutcome {
    pub network: DiscreteNetwork,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BifError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("variable '{0}' declared twice")]
    DuplicateVariable(String),
    #[error("variable '{0}' has fewer than two states")]
    TooFewStates(String),
    #[error("variable '{name}' has {listed} states listed but declares {declared}")]
    StateCountMismatch { name: String, declared: usize, listed: usize },
    #[error("variable '{name}' lists state '{state}' twice")]
    DuplicateState { name: String, state: String },
    #[error("variable '{name}' has cardinality {card}, the maximum is {max}", max = MAX_CARDINALITY)]
    CardinalityTooLarge { name: String, card: usize },
    #[error("reference to undeclared variable '{0}'")]
    UnknownVariable(String),
    #[error("'{0}' cannot be its own parent")]
    SelfParent(String),
    #[error("variable '{child}' lists parent '{parent}' twice")]
    DuplicateParent { child: String, parent: String },
    #[error("two probability blocks for '{0}'")]
    DuplicateProbability(String),
    #[error("no probability block for '{0}'")]
    MissingProbability(String),
    #[error("variable '{name}': state '{state}' is not one of its values")]
    UnknownState { name: String, state: String },
    #[error("'{child}' row {config} listed twice")]
    DuplicateRow { child: String, config: usize },
    #[error("'{child}' is missing the row for configuration {config}")]
    MissingRow { child: String, config: usize },
    #[error("'{child}' row {config} has {found} probabilities, expected {expected}")]
    RowLengthMismatch { child: String, config: usize, expected: usize, found: usize },
    #[error("'{child}' table has {found} probabilities, expected {expected}")]
    TableLengthMismatch { child: String, expected: usize, found: usize },
    #[error("'{child}' row {config} holds a negative or non-finite probability")]
    BadProbability { child: String, config: usize },
    #[error("'{child}' row {config} sums to {sum}, outside tolerance")]
    BadRowSum { child: String, config: usize, sum: f64 },
    #[error("the parent structure contains a cycle")]
    Cyclic,
    #[error("network declares no variables")]
    NoVariables,
}

impl DiscreteNetwork {
    /// Assemble and validate a network. `cpts[i].child` must equal `i`,
    /// and every row must already sum to 1 within `ROW_SUM_KEEP` (the
    /// parser renormalizes before calling this).
    pub fn new(name: String, variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self, BifError> {
        if variables.is_empty() {
            return Err(BifError::NoVariables);
        }
        let n = variables.len();
        for (i, v) in variables.iter().enumerate() {
            if v.states.len() < 2 {
                return Err(BifError::TooFewStates(v.name.clone()));
            }
            if v.states.len() > MAX_CARDINALITY {
                return Err(BifError::CardinalityTooLarge { name: v.name.clone(), card: v.states.len() });
            }
            for (si, s) in v.states.iter().enumerate() {
                if v.states[..si].contains(s) {
                    return Err(BifError::DuplicateState { name: v.name.clone(), state: s.clone() });
                }
            }
            if variables[..i].iter().any(|u| u.name == v.name) {
                return Err(BifError::DuplicateVariable(v.name.clone()));
            }
        }
        assert_eq!(cpts.len(), n, "one CPT per variable, indexed by variable");
        let mut edges = Vec::new();
        for (i, cpt) in cpts.iter().enumerate() {
            assert_eq!(cpt.child, i, "CPT {i} is for variable {}", cpt.child);
            let child_name = &variables[i].name;
            let mut configs = 1usize;
            for (pi, &p) in cpt.parents.iter().enumerate() {
                if p >= n {
                    return Err(BifError::UnknownVariable(format!("#{p}")));
                }
                if p == i {
                    return Err(BifError::SelfParent(child_name.clone()));
                }
                if cpt.parents[..pi].contains(&p) {
                    return Err(BifError::DuplicateParent {
                        child: child_name.clone(),
                        parent: variables[p].name.clone(),
                    });
                }
                configs *= variables[p].states.len();
                edges.push((p, i));
            }
            if cpt.rows.len() != configs {
                return Err(BifError::TableLengthMismatch {
                    child: child_name.clone(),
                    expected: configs,
                    found: cpt.rows.len(),
                });
            }
            let r = variables[i].states.len();
            for (config, row) in cpt.rows.iter().enumerate() {
                if row.len() != r {
                    return Err(BifError::RowLengthMismatch {
                        child: child_name.clone(),
                        config,
                        expected: r,
                        found: row.len(),
                    });
                }
                if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(BifError::BadProbability { child: child_name.clone(), config });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_KEEP {
                    return Err(BifError::BadRowSum { child: child_name.clone(), config, sum });
                }
            }
        }
        let dag = Dag::from_edges(n, &edges).map_err(|e| match e {
            OperationError::WouldCycle { .. } => BifError::Cyclic,
            // Duplicate parents were already rejected above.
            other => unreachable!("edge list from validated CPTs: {other}"),
        })?;
        Ok(DiscreteNetwork { name, variables, dag, cpts })
    }

    pub fn n_nodes(&self) -> usize {
        self.variables.len()
    }

    pub fn edge_count(&self) -> usize {
        self.dag.edge_count()
    }

    /// Fraction of the n(n-1) ordered node pairs that carry an edge.
    pub fn density(&self) -> f64 {
        let n = self.n_nodes();
        assert!(n >= 2, "density needs at least two nodes");
        self.edge_count() as f64 / (n * (n - 1)) as f64
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn cpt(&self, i: usize) -> &Cpt {
        &self.cpts[i]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Schema matching this network's variables, in variable order.
    pub fn schema(&self) -> Schema {
        Schema {
            variables: self
                .variables
                .iter()
                .map(|v| SchemaVariable { name: v.name.clone(), states: v.states.clone() })
                .collect(),
        }
    }

    /// CPT row of `child` under the parent values in `assignment`, a full
    /// assignment indexed by variable.
    pub fn row_for(&self, child: usize, assignment: &[u8]) -> &[f64] {
        let cpt = &self.cpts[child];
        let mut config = 0usize;
        for &p in &cpt.parents {
            config = config * self.variables[p].states.len() + assignment[p] as usize;
        }
        &cpt.rows[config]
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Sym(char),
    Atom(String),
    Str,
}

struct Lexer {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, BifError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '/' => {
                chars.next();
                match chars.peek() {
                    Some('/') => {
                        for c in chars.by_ref() {
                            if c == '\n' {
                                line += 1;
                                break;
                            }
                        }
                    }
                    Some('*') => {
                        chars.next();
                        let mut prev = ' ';
                        let mut closed = false;
                        for c in chars.by_ref() {
                            if c == '\n' {
                                line += 1;
                            }
                            if prev == '*' && c == '/' {
                                closed = true;
                                break;
                            }
                            prev = c;
                        }
                        if !closed {
                            return Err(BifError::Syntax { line, msg: "unterminated comment".into() });
                        }
                    }
                    _ => {
                        return Err(BifError::Syntax { line, msg: "stray '/'".into() });
                    }
                }
            }
            '"' => {
                chars.next();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                    }
                    if c == '"' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(BifError::Syntax { line, msg: "unterminated string".into() });
                }
                tokens.push((Token::Str, line));
            }
            '{' | '}' | '(' | ')' | '[' | ']' | '|' | ',' | ';' => {
                tokens.push((Token::Sym(c), line));
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || "{}()[]|,;\"".contains(c) {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                tokens.push((Token::Atom(atom), line));
            }
        }
    }
    Ok(tokens)
}

impl Lexer {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map_or(0, |&(_, l)| l)
    }

    fn next(&mut self) -> Result<Token, BifError> {
        let t = self
            .tokens
            .get(self.pos)
            .map(|(t, _)| t.clone())
            .ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn err(&self, msg: impl Into<String>) -> BifError {
        BifError::Syntax { line: self.line(), msg: msg.into() }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), BifError> {
        match self.next()? {
            Token::Sym(got) if got == c => Ok(()),
            got => Err(self.err(format!("expected '{c}', found {got:?}"))),
        }
    }

    fn atom(&mut self) -> Result<String, BifError> {
        match self.next()? {
            Token::Atom(a) => Ok(a),
            got => Err(self.err(format!("expected a name, found {got:?}"))),
        }
    }

    fn eat_atom(&mut self, word: &str) -> bool {
        if self.peek() == Some(&Token::Atom(word.to_string())) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Skip a `property ... ;` entry.
    fn skip_to_semicolon(&mut self) -> Result<(), BifError> {
        loop {
            if self.next()? == Token::Sym(';') {
                return Ok(());
            }
        }
    }
}

struct RawCpt {
    child: String,
    parents: Vec<String>,
    // Either a flat table or labeled rows (labels, probabilities).
    table: Option<Vec<f64>>,
    rows: Vec<(Vec<String>, Vec<f64>)>,
}

/// Parse BIF text into a validated network. Rows whose probabilities sum
/// to 1 within `ROW_SUM_RENORMALIZE` but not `ROW_SUM_KEEP` are rescaled
/// and reported in the outcome's warnings.
pub fn parse_bif(text: &str) -> Result<ParseOutcome, BifError> {
    let mut lx = Lexer { tokens: lex(text)?, pos: 0 };

    if !lx.eat_atom("network") {
        return Err(lx.err("input must start with a network block"));
    }
    let name = lx.atom()?;
    lx.expect_sym('{')?;
    loop {
        match lx.next()? {
            Token::Sym('}') => break,
            Token::Sym('{') => return Err(lx.err("nested block in network header")),
            _ => {}
        }
    }

    let mut variables: Vec<Variable> = Vec::new();
    let mut raw_cpts: Vec<RawCpt> = Vec::new();
    while lx.peek().is_some() {
        if lx.eat_atom("variable") {
            variables.push(parse_variable(&mut lx)?);
        } else if lx.eat_atom("probability") {
            raw_cpts.push(parse_probability(&mut lx)?);
        } else {
            return Err(lx.err("expected 'variable' or 'probability'"));
        }
    }

    assemble(name, variables, raw_cpts)
}

fn parse_variable(lx: &mut Lexer) -> Result<Variable, BifError> {
    let name = lx.atom()?;
    lx.expect_sym('{')?;
    let mut states = Vec::new();
    let mut declared = 0usize;
    let mut saw_type = false;
    loop {
        if lx.eat_atom("type") {
            if !lx.eat_atom("discrete") {
                return Err(lx.err("only discrete variables are supported"));
            }
            lx.expect_sym('[')?;
            let card = lx.atom()?;
            declared = card
                .parse()
                .map_err(|_| lx.err(format!("bad cardinality '{card}'")))?;
            lx.expect_sym(']')?;
            lx.expect_sym('{')?;
            loop {
                states.push(lx.atom()?);
                match lx.next()? {
                    Token::Sym(',') => continue,
                    Token::Sym('}') => break,
                    _ => return Err(lx.err("expected ',' or '}' in state list")),
                }
            }
            lx.expect_sym(';')?;
            saw_type = true;
        } else if lx.eat_atom("property") {
            lx.skip_to_semicolon()?;
        } else if lx.peek() == Some(&Token::Sym('}')) {
            lx.next()?;
            break;
        } else {
            return Err(lx.err("expected 'type', 'property', or '}' in variable block"));
        }
    }
    if !saw_type {
        return Err(lx.err(format!("variable '{name}' has no type declaration")));
    }
    if states.len() != declared {
        return Err(BifError::StateCountMismatch { name, declared, listed: states.len() });
    }
    Ok(Variable { name, states })
}

fn parse_number_list(lx: &mut Lexer) -> Result<Vec<f64>, BifError> {
    let mut out = Vec::new();
    loop {
        match lx.next()? {
            Token::Atom(a) => {
                let v: f64 =
                    a.parse().map_err(|_| lx.err(format!("bad probability '{a}'")))?;
                out.push(v);
            }
            Token::Sym(';') => return Ok(out),
            Token::Sym(',') => {}
            got => return Err(lx.err(format!("expected a probability, found {got:?}"))),
        }
    }
}

fn parse_probability(lx: &mut Lexer) -> Result<RawCpt, BifError> {
    lx.expect_sym('(')?;
    let child = lx.atom()?;
    let mut parents = Vec::new();
    match lx.next()? {
        Token::Sym(')') => {}
        Token::Sym('|') => loop {
            parents.push(lx.atom()?);
            match lx.next()? {
                Token::Sym(',') => continue,
                Token::Sym(')') => break,
                _ => return Err(lx.err("expected ',' or ')' in parent list")),
            }
        },
        _ => return Err(lx.err("expected '|' or ')' after the child name")),
    }
    lx.expect_sym('{')?;
    let mut raw = RawCpt { child, parents, table: None, rows: Vec::new() };
    loop {
        if lx.eat_atom("table") {
            if raw.table.is_some() {
                return Err(lx.err("two table entries in one probability block"));
            }
            raw.table = Some(parse_number_list(lx)?);
        } else if lx.eat_atom("property") {
            lx.skip_to_semicolon()?;
        } else if lx.peek() == Some(&Token::Sym('(')) {
            lx.next()?;
            let mut labels = Vec::new();
            loop {
                labels.push(lx.atom()?);
                match lx.next()? {
                    Token::Sym(',') => continue,
                    Token::Sym(')') => break,
                    _ => return Err(lx.err("expected ',' or ')' in a row label")),
                }
            }
            raw.rows.push((labels, parse_number_list(lx)?));
        } else if lx.peek() == Some(&Token::Sym('}')) {
            lx.next()?;
            break;
        } else {
            return Err(lx.err("expected 'table', a '(' row, or '}' in probability block"));
        }
    }
    Ok(raw)
}

fn assemble(
    name: String,
    variables: Vec<Variable>,
    raw_cpts: Vec<RawCpt>,
) -> Result<ParseOutcome, BifError> {
    if variables.is_empty() {
        return Err(BifError::NoVariables);
    }
    let var_index = |name: &str| -> Result<usize, BifError> {
        variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| BifError::UnknownVariable(name.to_string()))
    };

    let mut cpts: Vec<Option<Cpt>> = vec![None; variables.len()];
    let mut warnings = Vec::new();
    for raw in raw_cpts {
        let child = var_index(&raw.child)?;
        if cpts[child].is_some() {
            return Err(BifError::DuplicateProbability(raw.child.clone()));
        }
        let parents: Vec<usize> =
            raw.parents.iter().map(|p| var_index(p)).collect::<Result<_, _>>()?;
        let configs: usize = parents.iter().map(|&p| variables[p].states.len()).product();
        let r = variables[child].states.len();

        let mut rows: Vec<Option<Vec<f64>>> = vec![None; configs];
        if let Some(flat) = raw.table {
            if !raw.rows.is_empty() {
                return Err(BifError::DuplicateRow { child: raw.child.clone(), config: 0 });
            }
            if flat.len() != configs * r {
                return Err(BifError::TableLengthMismatch {
                    child: raw.child.clone(),
                    expected: configs * r,
                    found: flat.len(),
                });
            }
            for (config, chunk) in flat.chunks(r).enumerate() {
                rows[config] = Some(chunk.to_vec());
            }
        } else {
            for (labels, probs) in raw.rows {
                if labels.len() != parents.len() {
                    return Err(BifError::RowLengthMismatch {
                        child: raw.child.clone(),
                        config: 0,
                        expected: parents.len(),
                        found: labels.len(),
                    });
                }
                let mut config = 0usize;
                for (label, &p) in labels.iter().zip(&parents) {
                    let idx = variables[p]
                        .states
                        .iter()
                        .position(|s| s == label)
                        .ok_or_else(|| BifError::UnknownState {
                            name: variables[p].name.clone(),
                            state: label.clone(),
                        })?;
                    config = config * variables[p].states.len() + idx;
                }
                if rows[config].is_some() {
                    return Err(BifError::DuplicateRow { child: raw.child.clone(), config });
                }
                rows[config] = Some(probs);
            }
        }

        let mut final_rows = Vec::with_capacity(configs);
        for (config, row) in rows.into_iter().enumerate() {
            let mut row =
                row.ok_or_else(|| BifError::MissingRow { child: raw.child.clone(), config })?;
            if row.len() != r {
                return Err(BifError::RowLengthMismatch {
                    child: raw.child.clone(),
                    config,
                    expected: r,
                    found: row.len(),
                });
            }
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(BifError::BadProbability { child: raw.child.clone(), config });
            }
            let sum: f64 = row.iter().sum();
            let off = (sum - 1.0).abs();
            if off > ROW_SUM_RENORMALIZE {
                return Err(BifError::BadRowSum { child: raw.child.clone(), config, sum });
            }
            if off > ROW_SUM_KEEP {
                for p in &mut row {
                    *p /= sum;
                }
                warnings.push(format!(
                    "renormalized '{}' row {config}: probabilities summed to {sum}",
                    raw.child
                ));
            }
            final_rows.push(row);
        }
        cpts[child] = Some(Cpt { child, parents, rows: final_rows });
    }

    let mut final_cpts = Vec::with_capacity(cpts.len());
    for (i, cpt) in cpts.into_iter().enumerate() {
        final_cpts.push(cpt.ok_or_else(|| BifError::MissingProbability(variables[i].name.clone()))?);
    }

    let network = DiscreteNetwork::new(name, variables, final_cpts)?;
    Ok(ParseOutcome { network, warnings })
}

/// Serialize a network in the same subset `parse_bif` reads. Parsing the
/// output reproduces the network exactly, and a second write is byte
/// identical (blocks are emitted in variable order).
pub fn write_bif(net: &DiscreteNetwork) -> String {
    let mut out = String::new();
    out.push_str(&format!("network {} {{\n}}\n", net.name));
    for v in net.variables() {
        out.push_str(&format!(
            "variable {} {{\n  type discrete [ {} ] {{ {} }};\n}}\n",
            v.name,
            v.states.len(),
            v.states.join(", ")
        ));
    }
    for i in 0..net.n_nodes() {
        let cpt = net.cpt(i);
        let child = &net.variable(i).name;
        if cpt.parents.is_empty() {
            out.push_str(&format!("probability ( {child} ) {{\n"));
            out.push_str(&format!("  table {};\n", join_probs(&cpt.rows[0])));
            out.push_str("}\n");
        } else {
            let parent_names: Vec<&str> =
                cpt.parents.iter().map(|&p| net.variable(p).name.as_str()).collect();
            out.push_str(&format!(
                "probability ( {child} | {} ) {{\n",
                parent_names.join(", ")
            ));
            let cards: Vec<usize> =
                cpt.parents.iter().map(|&p| net.variable(p).states.len()).collect();
            for (config, row) in cpt.rows.iter().enumerate() {
                let mut labels = Vec::with_capacity(cards.len());
                let mut rem = config;
                for &card in cards.iter().rev() {
                    labels.push(rem % card);
                    rem /= card;
                }
                labels.reverse();
                let label_names: Vec<&str> = labels
                    .iter()
                    .zip(&cpt.parents)
                    .map(|(&s, &p)| net.variable(p).states[s].as_str())
                    .collect();
                out.push_str(&format!(
                    "  ( {} ) {};\n",
                    label_names.join(", "),
                    join_probs(row)
                ));
            }
            out.push_str("}\n");
        }
    }
    out
}

fn join_probs(row: &[f64]) -> String {
    row.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
}
