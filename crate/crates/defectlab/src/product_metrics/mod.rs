//! Product (code) metrics over file snapshots.
//!
//! A deterministic lexical subset is computed natively from a Java-lite
//! token stream; the semantic rest (cohesion, coupling, inheritance,
//! statement decl/exe splits) can only come from an external tool export
//! and is merged in from CSV. Native values survive the merge wherever the
//! import lacks a column.

pub mod tokenizer;

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gitio::Git;
use crate::repo_mining::{ChangeKind, ProjectHistory};
use tokenizer::{line_profile, tokenize, Token, TokenKind};

/// All product metric names, in output-column order.
pub const PRODUCT_METRICS: [&str; 45] = [
    "AvgCyclomatic",
    "AvgCyclomaticModified",
    "AvgCyclomaticStrict",
    "AvgEssential",
    "AvgLine",
    "AvgLineBlank",
    "AvgLineCode",
    "AvgLineComment",
    "CountDeclClassMethod",
    "CountDeclClassVariable",
    "CountDeclInstanceMethod",
    "CountDeclInstanceVariable",
    "CountDeclMethod",
    "CountDeclMethodAll",
    "CountDeclMethodDefault",
    "CountDeclMethodPrivate",
    "CountDeclMethodProtected",
    "CountDeclMethodPublic",
    "CountLine",
    "CountLineBlank",
    "CountLineCode",
    "CountLineCodeDecl",
    "CountLineCodeExe",
    "CountLineComment",
    "CountSemicolon",
    "CountStmt",
    "CountStmtDecl",
    "CountStmtExe",
    "MaxCyclomatic",
    "MaxCyclomaticModified",
    "MaxCyclomaticStrict",
    "MaxEssential",
    "RatioCommentToCode",
    "SumCyclomatic",
    "SumCyclomaticModified",
    "SumCyclomaticStrict",
    "SumEssential",
    "PercentLackOfCohesion",
    "PercentLackOfCohesionModified",
    "MaxInheritanceTree",
    "CountClassDerived",
    "CountClassCoupled",
    "CountClassCoupledModified",
    "CountClassBase",
    "MaxNesting",
];

/// The subset the tokenizer can compute without cross-file resolution.
pub const NATIVE_PRODUCT_METRICS: [&str; 29] = [
    "AvgCyclomatic",
    "AvgCyclomaticModified",
    "AvgCyclomaticStrict",
    "AvgLine",
    "AvgLineBlank",
    "AvgLineCode",
    "AvgLineComment",
    "CountDeclClassVariable",
    "CountDeclInstanceVariable",
    "CountDeclMethod",
    "CountDeclMethodDefault",
    "CountDeclMethodPrivate",
    "CountDeclMethodProtected",
    "CountDeclMethodPublic",
    "CountLine",
    "CountLineBlank",
    "CountLineCode",
    "CountLineComment",
    "CountSemicolon",
    "CountStmt",
    "MaxCyclomatic",
    "MaxCyclomaticModified",
    "MaxCyclomaticStrict",
    "MaxEssential",
    "RatioCommentToCode",
    "SumCyclomatic",
    "SumCyclomaticModified",
    "SumCyclomaticStrict",
    "MaxNesting",
];

/// Column index of a metric name.
#[must_use]
pub fn metric_index(name: &str) -> Option<usize> {
    PRODUCT_METRICS.iter().position(|m| *m == name)
}

/// One (file, commit) observation; `values` is parallel to
/// [`PRODUCT_METRICS`], `None` meaning not available.
#[derive(Debug, Clone)]
pub struct ProductRow {
    /// rename-stable file identity
    pub file: String,
    pub commit: String,
    pub values: Vec<Option<f64>>,
}

impl ProductRow {
    #[must_use]
    pub fn new(file: impl Into<String>, commit: impl Into<String>) -> Self {
        ProductRow {
            file: file.into(),
            commit: commit.into(),
            values: vec![None; PRODUCT_METRICS.len()],
        }
    }

    #[must_use]
    pub fn get(&self, name: &str) -> Option<f64> {
        metric_index(name).and_then(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, v: f64) -> Result<()> {
        let i = metric_index(name)
            .ok_or_else(|| Error::Data(format!("unknown product metric {name:?}")))?;
        self.values[i] = Some(v);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Native computation

#[derive(Debug, Default)]
struct MethodRecord {
    start_line: u32,
    cyclo: u32,
    cyclo_mod: u32,
    cyclo_strict: u32,
    breaks: u32,
    returns: u32,
    last_return_semi: Option<usize>,
    pending_return: bool,
    max_nesting: u32,
    stack_pos: usize,
    visibility: Visibility,
    concrete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Visibility {
    Public,
    Private,
    Protected,
    #[default]
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScopeKind {
    Class,
    Method,
    Block,
}

/// Computes the native metric subset from source text. Degenerate parses
/// never fail; they just yield zero-method rows.
#[must_use]
pub fn compute_product_row(text: &str) -> Vec<Option<f64>> {
    let lexed = tokenize(text);
    let tokens = &lexed.tokens;
    let profile = line_profile(text, tokens);

    let mut values = vec![None; PRODUCT_METRICS.len()];
    let mut set = |name: &str, v: f64| {
        let i = metric_index(name).expect("native metric name");
        values[i] = Some(v);
    };

    // file-level line counts
    let count_line = profile.total_lines;
    let blank = profile.blank_count();
    let code = profile.has_code.iter().filter(|b| **b).count();
    let comment = profile.has_comment.iter().filter(|b| **b).count();
    let semicolons = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Semicolon)
        .count();
    let heads = tokens
        .iter()
        .filter(|t| {
            t.kind == TokenKind::Keyword
                && matches!(
                    t.text.as_str(),
                    "if" | "else" | "for" | "while" | "do" | "switch" | "try" | "catch" | "finally"
                )
        })
        .count();

    let parsed = parse_scopes(tokens);

    let concrete: Vec<&MethodDone> = parsed.methods.iter().filter(|m| m.concrete).collect();
    let n = concrete.len();
    let mean = |f: &dyn Fn(&MethodDone) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            concrete.iter().map(|m| f(m)).sum::<f64>() / n as f64
        }
    };
    let maxv = |f: &dyn Fn(&MethodDone) -> u32| -> u32 {
        concrete.iter().map(|m| f(m)).max().unwrap_or(0)
    };

    // per-method line-window counts against the file profile
    let window = |m: &MethodDone, flags: &dyn Fn(usize) -> bool| -> f64 {
        let lo = m.start_line.max(1) as usize;
        let hi = (m.end_line as usize).min(profile.total_lines);
        (lo..=hi).filter(|&l| flags(l - 1)).count() as f64
    };

    set("CountLine", count_line as f64);
    set("CountLineBlank", blank as f64);
    set("CountLineCode", code as f64);
    set("CountLineComment", comment as f64);
    set("CountSemicolon", semicolons as f64);
    set("CountStmt", (semicolons + heads) as f64);
    set("RatioCommentToCode", comment as f64 / (code.max(1)) as f64);

    set("CountDeclMethod", parsed.methods.len() as f64);
    for (name, vis) in [
        ("CountDeclMethodPublic", Visibility::Public),
        ("CountDeclMethodPrivate", Visibility::Private),
        ("CountDeclMethodProtected", Visibility::Protected),
        ("CountDeclMethodDefault", Visibility::Default),
    ] {
        set(
            name,
            parsed.methods.iter().filter(|m| m.visibility == vis).count() as f64,
        );
    }
    set("CountDeclInstanceVariable", parsed.instance_vars as f64);
    set("CountDeclClassVariable", parsed.class_vars as f64);

    set("AvgCyclomatic", mean(&|m| f64::from(m.cyclo)));
    set("AvgCyclomaticModified", mean(&|m| f64::from(m.cyclo_mod)));
    set("AvgCyclomaticStrict", mean(&|m| f64::from(m.cyclo_strict)));
    set("MaxCyclomatic", f64::from(maxv(&|m| m.cyclo)));
    set("MaxCyclomaticModified", f64::from(maxv(&|m| m.cyclo_mod)));
    set("MaxCyclomaticStrict", f64::from(maxv(&|m| m.cyclo_strict)));
    set(
        "SumCyclomatic",
        concrete.iter().map(|m| f64::from(m.cyclo)).sum(),
    );
    set(
        "SumCyclomaticModified",
        concrete.iter().map(|m| f64::from(m.cyclo_mod)).sum(),
    );
    set(
        "SumCyclomaticStrict",
        concrete.iter().map(|m| f64::from(m.cyclo_strict)).sum(),
    );
    set("MaxEssential", f64::from(maxv(&|m| m.essential)));
    set("MaxNesting", f64::from(maxv(&|m| m.max_nesting)));

    set("AvgLine", mean(&|m| {
        (m.end_line.max(m.start_line) - m.start_line + 1) as f64
    }));
    set("AvgLineCode", mean(&|m| window(m, &|i| profile.has_code[i])));
    set("AvgLineBlank", mean(&|m| {
        window(m, &|i| !profile.has_code[i] && !profile.has_comment[i])
    }));
    set("AvgLineComment", mean(&|m| window(m, &|i| profile.has_comment[i])));

    values
}

#[derive(Debug)]
struct MethodDone {
    start_line: u32,
    end_line: u32,
    cyclo: u32,
    cyclo_mod: u32,
    cyclo_strict: u32,
    essential: u32,
    max_nesting: u32,
    visibility: Visibility,
    concrete: bool,
}

#[derive(Debug, Default)]
struct ParsedScopes {
    methods: Vec<MethodDone>,
    instance_vars: u32,
    class_vars: u32,
}

/// Brace-depth scope walk: `{` after `class|interface|enum` opens a class
/// body, `{` after `Ident ( ... )` at class depth opens a method (unless
/// the statement carries `=`, which catches anonymous-class field
/// initialisers), anything else is a block.
fn parse_scopes(tokens: &[Token]) -> ParsedScopes {
    let mut out = ParsedScopes::default();
    // scope kind plus the statement prefix to restore when it closes
    // (field declarations may wrap initialiser braces)
    let mut stack: Vec<(ScopeKind, Vec<usize>)> = Vec::new();
    let mut methods_open: Vec<MethodRecord> = Vec::new();
    // non-newline tokens since the last statement boundary
    let mut stmt: Vec<usize> = Vec::new();

    for (ix, tok) in tokens.iter().enumerate() {
        if tok.kind == TokenKind::Newline {
            continue;
        }
        if let Some(m) = methods_open.last_mut() {
            credit_method(m, tok, ix);
        }
        match tok.kind {
            TokenKind::BraceOpen => {
                let kind = classify_brace(tokens, &stmt, &stack);
                if kind == ScopeKind::Method {
                    let (name_line, vis) = signature_info(tokens, &stmt);
                    methods_open.push(MethodRecord {
                        start_line: name_line.unwrap_or(tok.line),
                        visibility: vis,
                        stack_pos: stack.len(),
                        concrete: true,
                        ..MethodRecord::default()
                    });
                }
                let at_class = matches!(stack.last(), Some((ScopeKind::Class, _)) | None);
                let saved = if kind == ScopeKind::Block && at_class {
                    std::mem::take(&mut stmt)
                } else {
                    Vec::new()
                };
                stack.push((kind, saved));
                if let Some(m) = methods_open.last_mut() {
                    let depth = (stack.len() - m.stack_pos).saturating_sub(1) as u32;
                    m.max_nesting = m.max_nesting.max(depth);
                }
                stmt.clear();
            }
            TokenKind::BraceClose => {
                let closed = stack.pop();
                match closed {
                    Some((ScopeKind::Method, _)) => {
                        if let Some(m) = methods_open.pop() {
                            out.methods.push(finish_method(m, tokens, ix, tok.line));
                        }
                        stmt.clear();
                    }
                    Some((_, saved)) => stmt = saved,
                    None => stmt.clear(),
                }
            }
            TokenKind::Semicolon => {
                let at_class = matches!(stack.last(), Some((ScopeKind::Class, _)));
                if at_class && !stmt.is_empty() {
                    classify_class_statement(tokens, &stmt, &mut out);
                }
                stmt.clear();
            }
            TokenKind::LineComment | TokenKind::BlockComment => {}
            _ => stmt.push(ix),
        }
    }
    out
}

fn credit_method(m: &mut MethodRecord, tok: &Token, ix: usize) {
    match tok.kind {
        TokenKind::Keyword => match tok.text.as_str() {
            "if" | "for" | "while" | "catch" => {
                m.cyclo += 1;
                m.cyclo_mod += 1;
                m.cyclo_strict += 1;
            }
            "case" => {
                m.cyclo += 1;
                m.cyclo_strict += 1;
            }
            "switch" => m.cyclo_mod += 1,
            "break" | "continue" => m.breaks += 1,
            "return" => m.pending_return = true,
            _ => {}
        },
        TokenKind::Punct => match tok.text.as_str() {
            "?" => {
                m.cyclo += 1;
                m.cyclo_mod += 1;
                m.cyclo_strict += 1;
            }
            "&&" | "||" => m.cyclo_strict += 1,
            _ => {}
        },
        TokenKind::Semicolon if m.pending_return => {
            m.returns += 1;
            m.last_return_semi = Some(ix);
            m.pending_return = false;
        }
        _ => {}
    }
}

fn finish_method(m: MethodRecord, tokens: &[Token], close_ix: usize, close_line: u32) -> MethodDone {
    // the final statement is a return iff only newlines / closing braces
    // sit between its semicolon and the method's closing brace
    let final_return = m.last_return_semi.is_some_and(|semi| {
        tokens[semi + 1..close_ix]
            .iter()
            .all(|t| matches!(t.kind, TokenKind::Newline | TokenKind::BraceClose))
    });
    let nonfinal = if final_return {
        m.returns.saturating_sub(1)
    } else {
        m.returns
    };
    let base = 1 + m.cyclo; // cyclo field counted decisions only
    MethodDone {
        start_line: m.start_line,
        end_line: close_line,
        cyclo: base,
        cyclo_mod: 1 + m.cyclo_mod,
        cyclo_strict: base + (m.cyclo_strict - m.cyclo),
        essential: (1 + m.breaks + nonfinal).min(base),
        max_nesting: m.max_nesting,
        visibility: m.visibility,
        concrete: m.concrete,
    }
}

fn classify_brace(tokens: &[Token], stmt: &[usize], stack: &[(ScopeKind, Vec<usize>)]) -> ScopeKind {
    let has_type_keyword = stmt.iter().any(|&i| {
        tokens[i].kind == TokenKind::Keyword
            && matches!(tokens[i].text.as_str(), "class" | "interface" | "enum")
    });
    if has_type_keyword {
        return ScopeKind::Class;
    }
    let at_class = matches!(stack.last(), Some((ScopeKind::Class, _)));
    if at_class && method_signature_name(tokens, stmt).is_some() {
        return ScopeKind::Method;
    }
    ScopeKind::Block
}

/// Index of the method-name identifier if `stmt` looks like
/// `...modifiers... Name ( params )` with no top-level `=`.
fn method_signature_name(tokens: &[Token], stmt: &[usize]) -> Option<usize> {
    let last = *stmt.last()?;
    if tokens[last].text != ")" {
        return None;
    }
    if stmt
        .iter()
        .any(|&i| tokens[i].kind == TokenKind::Punct && tokens[i].text == "=")
    {
        return None;
    }
    // walk back to the matching open paren
    let mut depth = 0i32;
    let mut open = None;
    for &i in stmt.iter().rev() {
        match tokens[i].text.as_str() {
            ")" => depth += 1,
            "(" => {
                depth -= 1;
                if depth == 0 {
                    open = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let open = open?;
    let name = stmt.iter().rev().find(|&&i| i < open)?;
    (tokens[*name].kind == TokenKind::Ident).then_some(*name)
}

fn signature_info(tokens: &[Token], stmt: &[usize]) -> (Option<u32>, Visibility) {
    let name_line = method_signature_name(tokens, stmt).map(|i| tokens[i].line);
    (name_line, visibility_of(tokens, stmt))
}

fn visibility_of(tokens: &[Token], stmt: &[usize]) -> Visibility {
    for &i in stmt {
        if tokens[i].kind == TokenKind::Keyword {
            match tokens[i].text.as_str() {
                "public" => return Visibility::Public,
                "private" => return Visibility::Private,
                "protected" => return Visibility::Protected,
                _ => {}
            }
        }
    }
    Visibility::Default
}

/// A `;`-terminated statement in a class body is either an abstract/
/// interface method declaration (it has parens) or a field declaration.
/// Field declarator count = 1 + commas outside any bracket nesting.
fn classify_class_statement(tokens: &[Token], stmt: &[usize], out: &mut ParsedScopes) {
    let has_paren = stmt.iter().any(|&i| tokens[i].text == "(");
    let has_assign = stmt
        .iter()
        .any(|&i| tokens[i].kind == TokenKind::Punct && tokens[i].text == "=");
    if has_paren && !has_assign {
        out.methods.push(MethodDone {
            start_line: tokens[stmt[0]].line,
            end_line: tokens[*stmt.last().unwrap()].line,
            cyclo: 0,
            cyclo_mod: 0,
            cyclo_strict: 0,
            essential: 0,
            max_nesting: 0,
            visibility: visibility_of(tokens, stmt),
            concrete: false,
        });
        return;
    }
    if stmt.is_empty() {
        return;
    }
    let is_static = stmt
        .iter()
        .any(|&i| tokens[i].kind == TokenKind::Keyword && tokens[i].text == "static");
    // package/import lines reach here only at file depth, not class depth
    let mut declarators = 1u32;
    let mut round = 0i32;
    let mut square = 0i32;
    let mut curly = 0i32;
    let mut angle = 0i32;
    let mut prev_ident_or_close = false;
    for &i in stmt {
        let t = &tokens[i];
        match t.text.as_str() {
            "(" => round += 1,
            ")" => round -= 1,
            "[" => square += 1,
            "]" => square -= 1,
            "<" if prev_ident_or_close => angle += 1,
            ">" if angle > 0 => angle -= 1,
            "," if round == 0 && square == 0 && curly == 0 && angle == 0 => declarators += 1,
            "{" => curly += 1,
            "}" => curly -= 1,
            _ => {}
        }
        prev_ident_or_close =
            t.kind == TokenKind::Ident || matches!(t.text.as_str(), ">" | "]" | ")");
    }
    if is_static {
        out.class_vars += declarators;
    } else {
        out.instance_vars += declarators;
    }
}

// ---------------------------------------------------------------------------
// Snapshots and per-history computation

/// File content at a commit, lossily decoded.
pub fn snapshot(git: &Git, commit: &str, path: &str) -> Result<String> {
    Ok(String::from_utf8_lossy(&git.show_file(commit, path)?).into_owned())
}

/// Computes native rows for every source change in every non-merge commit,
/// reading the post-change snapshot. Deletions and binary changes carry no
/// snapshot and are skipped.
pub fn compute_for_history(
    git: &Git,
    history: &ProjectHistory,
    extensions: &[String],
) -> Result<Vec<ProductRow>> {
    let mut rows = Vec::new();
    for commit in &history.commits {
        if commit.is_merge() {
            continue;
        }
        for ch in &commit.changes {
            if ch.binary
                || ch.kind == ChangeKind::Delete
                || !has_extension(&ch.path, extensions)
            {
                continue;
            }
            let text = snapshot(git, &commit.hash, &ch.path)?;
            let mut row = ProductRow::new(ch.canonical_id.clone(), commit.hash.clone());
            row.values = compute_product_row(&text);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Case-insensitive extension match against a `.ext`-style list.
#[must_use]
pub fn has_extension(path: &str, extensions: &[String]) -> bool {
    let lower = path.to_lowercase();
    extensions.iter().any(|e| lower.ends_with(&e.to_lowercase()))
}

// ---------------------------------------------------------------------------
// CSV in/out

pub fn write_product_csv<W: Write>(rows: &[ProductRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["file", "commit"];
    header.extend(PRODUCT_METRICS);
    wtr.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.file.clone(), row.commit.clone()];
        for v in &row.values {
            rec.push(match v {
                Some(x) => format!("{x}"),
                None => String::new(),
            });
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug)]
pub struct ImportOutcome {
    pub rows: Vec<ProductRow>,
    pub warnings: Vec<String>,
}

/// Reads a product CSV keyed by (commit, file). Column names not in the
/// metric table produce warnings and are ignored; duplicate keys are an
/// error.
pub fn import_product_csv<R: Read>(reader: R, source_name: &str) -> Result<ImportOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut file_col = None;
    let mut commit_col = None;
    let mut metric_cols: Vec<(usize, usize)> = Vec::new(); // (csv col, metric idx)
    let mut warnings = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match h {
            "file" => file_col = Some(i),
            "commit" => commit_col = Some(i),
            name => match metric_index(name) {
                Some(mi) => metric_cols.push((i, mi)),
                None => warnings.push(format!("{source_name}: ignoring unknown column {name:?}")),
            },
        }
    }
    let (file_col, commit_col) = match (file_col, commit_col) {
        (Some(f), Some(c)) => (f, c),
        _ => {
            return Err(Error::parse(
                source_name,
                1,
                "header must contain `file` and `commit` columns",
            ))
        }
    };
    let mut rows = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let file = rec
            .get(file_col)
            .ok_or_else(|| Error::parse(source_name, line, "missing file cell"))?
            .to_string();
        let commit = rec
            .get(commit_col)
            .ok_or_else(|| Error::parse(source_name, line, "missing commit cell"))?
            .to_string();
        let key = (commit.clone(), file.clone());
        if seen.contains_key(&key) {
            return Err(Error::Import {
                path: source_name.into(),
                msg: format!("duplicate (commit,file) key ({commit},{file}) at line {line}"),
            });
        }
        let mut row = ProductRow::new(file, commit);
        for &(ci, mi) in &metric_cols {
            let cell = rec.get(ci).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(source_name, line, format!("bad numeric cell {cell:?}"))
            })?;
            row.values[mi] = Some(v);
        }
        seen.insert(key, rows.len());
        rows.push(row);
    }
    Ok(ImportOutcome { rows, warnings })
}

/// Merges imported rows into native ones by (commit, file). Imported
/// values win where present; import rows with no native partner are
/// appended.
pub fn merge_imports(mut native: Vec<ProductRow>, imported: Vec<ProductRow>) -> Vec<ProductRow> {
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (i, row) in native.iter().enumerate() {
        index.insert((row.commit.clone(), row.file.clone()), i);
    }
    for imp in imported {
        match index.get(&(imp.commit.clone(), imp.file.clone())) {
            Some(&i) => {
                for (slot, v) in native[i].values.iter_mut().zip(imp.values.iter()) {
                    if v.is_some() {
                        *slot = *v;
                    }
                }
            }
            None => native.push(imp),
        }
    }
    native
}
