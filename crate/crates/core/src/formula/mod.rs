//! Formula parsing: source cleanup, the LaTeX-subset parser, unit-annotated
//! literals and math-block extraction.

mod expr;
mod extract;
mod normalize;
mod parser;
pub mod units;

pub use expr::{free_variables, pow, Expr, Formula, Func, NamedConst, Relation, UnitLiteral};
pub use extract::{extract_formulas, strip_delimiters};
pub use normalize::normalize_source;
pub use parser::{fold_greek, parse_expr, parse_formula, parse_symbol, ParseError};
pub use units::{Dimension, UnitDef, UnitError, UnitTable};

/// Normalize then parse a raw block (delimiters allowed).
pub fn parse_block(raw: &str, units: &UnitTable) -> Result<Vec<Formula>, ParseError> {
    parse_formula(&normalize_source(strip_delimiters(raw)), units)
}
