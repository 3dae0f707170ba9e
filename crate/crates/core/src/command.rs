//! The command language: parsing transcript forms into [`Command`]s and
//! printing them back in canonical form.

use std::fmt;

use crate::model::{MarginalWeights, RuleSpec};
use crate::term::{read_forms, Form, ParseError, Symbol, Term};

#[derive(Debug, Clone, PartialEq)]
pub enum Fact {
    /// A value proposition such as `((draw 1) white)`, or a structural fact
    /// such as `(Same evidence-for (radio 1) (news 1))`.
    Proposition(Term),
    Marginal {
        target: Term,
        weights: MarginalWeights,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Variable { pattern: Term, values: Vec<Symbol> },
    Relation { parent: Term, child: Term, rules: Vec<RuleSpec> },
    Marginal { target: Term, weights: MarginalWeights },
    Instance(Term),
    Defactq(Fact),
    ProbabilityOf(Term),
    Retract(Term),
    ShowLabel(Term),
    ShowNogoods,
    Reset,
}

const HEADS: &[&str] = &[
    "Variable",
    "Relation",
    "Marginal",
    "Instance",
    "Defactq",
    "Deffactq",
    "Probability-of",
    "Probability",
    "Retract",
    "Show-label",
    "Show-nogoods",
    "Reset",
];

fn err_at(form: &Form, message: impl Into<String>) -> ParseError {
    ParseError::new(message, form.line, form.column)
}

/// Parses a single command. Text holding zero or several forms is an error.
pub fn parse_command(text: &str) -> Result<Command, ParseError> {
    let forms = read_forms(text)?;
    match forms.as_slice() {
        [form] => parse_form(form),
        [] => Err(ParseError::new("expected a command, found nothing", 1, 1)),
        [_, second, ..] => Err(err_at(second, "expected a single command")),
    }
}

/// Parses every command in a script, stopping at the first error.
pub fn parse_script(text: &str) -> Result<Vec<(Form, Command)>, ParseError> {
    read_forms(text)?
        .into_iter()
        .map(|form| {
            let cmd = parse_form(&form)?;
            Ok((form, cmd))
        })
        .collect()
}

pub fn parse_form(form: &Form) -> Result<Command, ParseError> {
    let items =
        form.term.as_list().ok_or_else(|| err_at(form, format!("expected a command form, found {}", form.term)))?;
    let head = match items.first() {
        Some(Term::Sym(s)) => s.as_str().to_ascii_lowercase(),
        _ => return Err(err_at(form, "a command starts with its name")),
    };
    let args = &items[1..];
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(err_at(
                form,
                format!("{} takes {n} argument{}, found {}", items[0], if n == 1 { "" } else { "s" }, args.len()),
            ))
        }
    };
    let ctx = Ctx { form };
    match head.as_str() {
        "variable" => ctx.variable(args),
        "relation" => ctx.relation(args),
        "marginal" => {
            let (target, weights) = ctx.marginal(args)?;
            Ok(Command::Marginal { target, weights })
        }
        "instance" => {
            arity(1)?;
            Ok(Command::Instance(args[0].clone()))
        }
        "defactq" | "deffactq" => {
            arity(1)?;
            let inner = &args[0];
            if let Some([Term::Sym(h), rest @ ..]) = inner.as_list() {
                if h.as_str().eq_ignore_ascii_case("marginal") {
                    let (target, weights) = ctx.marginal(rest)?;
                    return Ok(Command::Defactq(Fact::Marginal { target, weights }));
                }
            }
            Ok(Command::Defactq(Fact::Proposition(inner.clone())))
        }
        "probability-of" | "probability" => {
            arity(1)?;
            Ok(Command::ProbabilityOf(args[0].clone()))
        }
        "retract" => {
            arity(1)?;
            Ok(Command::Retract(args[0].clone()))
        }
        "show-label" => {
            arity(1)?;
            Ok(Command::ShowLabel(args[0].clone()))
        }
        "show-nogoods" => {
            arity(0)?;
            Ok(Command::ShowNogoods)
        }
        "reset" => {
            arity(0)?;
            Ok(Command::Reset)
        }
        _ => Err(err_at(form, format!("unknown command {}; expected one of {}", items[0], HEADS.join(", ")))),
    }
}

struct Ctx<'a> {
    form: &'a Form,
}

impl Ctx<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        err_at(self.form, message)
    }

    fn variable(&self, args: &[Term]) -> Result<Command, ParseError> {
        let (pattern, rest) = args.split_first().ok_or_else(|| self.err("Variable needs a pattern and values"))?;
        // `(Variable (source (radio ?n)) elem upi ap ind)`: the keyword
        // introduces the value list
        let rest = match rest {
            [Term::Sym(k), more @ ..] if k.as_str().eq_ignore_ascii_case("elem") && !more.is_empty() => more,
            _ => rest,
        };
        let values = rest
            .iter()
            .map(|v| v.as_symbol().cloned().ok_or_else(|| self.err(format!("value {v} must be a symbol"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(self.err(format!("Variable {pattern} needs at least one value")));
        }
        Ok(Command::Variable { pattern: pattern.clone(), values })
    }

    fn relation(&self, args: &[Term]) -> Result<Command, ParseError> {
        let [parent, child, rules @ ..] = args else {
            return Err(self.err("Relation needs a parent pattern, a child pattern and rules"));
        };
        let rules = rules.iter().map(|r| self.rule(r)).collect::<Result<Vec<_>, _>>()?;
        Ok(Command::Relation { parent: parent.clone(), child: child.clone(), rules })
    }

    /// `(-> PARENT (CHILD p) ...)` or `(-> (PARENT) ((CHILD p) ...))`.
    fn rule(&self, rule: &Term) -> Result<RuleSpec, ParseError> {
        let items = match rule.as_list() {
            Some([Term::Sym(arrow), rest @ ..]) if arrow.as_str() == "->" => rest,
            _ => return Err(self.err(format!("expected a rule (-> parent (child p) ...), found {rule}"))),
        };
        let (parent, entries) = items.split_first().ok_or_else(|| self.err("rule without a parent proposition"))?;
        let parent = match parent.as_list() {
            Some([inner @ Term::List(_)]) => inner,
            _ => parent,
        };
        let entries = match entries {
            [Term::List(group)] if !group.is_empty() && group.iter().all(|e| entry(e).is_some()) => group.as_slice(),
            _ => entries,
        };
        let entries = entries
            .iter()
            .map(|e| entry(e).ok_or_else(|| self.err(format!("expected (proposition probability), found {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RuleSpec { parent: parent.clone(), entries })
    }

    fn marginal(&self, args: &[Term]) -> Result<(Term, MarginalWeights), ParseError> {
        let (target, rest) = args.split_first().ok_or_else(|| self.err("Marginal needs a target and weights"))?;
        let numbers = |ts: &[Term]| ts.iter().map(Term::as_number).collect::<Option<Vec<f64>>>();
        let weights = match rest {
            [Term::List(inner)] if numbers(inner).is_some() => MarginalWeights::Positional(numbers(inner).unwrap()),
            _ if numbers(rest).is_some() => MarginalWeights::Positional(numbers(rest).unwrap()),
            _ if rest.len() % 2 == 0 => MarginalWeights::Pairs(
                rest.chunks(2)
                    .map(|pair| match pair {
                        [prop @ Term::List(_), Term::Num(w)] => Ok((prop.clone(), w.value())),
                        _ => {
                            Err(self.err(format!("expected a proposition and a weight, found {} {}", pair[0], pair[1])))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => return Err(self.err("Marginal weights are numbers, a list of numbers, or proposition/weight pairs")),
        };
        if w_len(&weights) == 0 {
            return Err(self.err(format!("Marginal for {target} lists no weights")));
        }
        Ok((target.clone(), weights))
    }
}

fn w_len(w: &MarginalWeights) -> usize {
    match w {
        MarginalWeights::Positional(v) => v.len(),
        MarginalWeights::Pairs(v) => v.len(),
    }
}

fn entry(t: &Term) -> Option<(Term, f64)> {
    match t.as_list()? {
        [prop @ Term::List(p), Term::Num(n)] if p.len() == 2 => Some((prop.clone(), n.value())),
        _ => None,
    }
}

fn num(x: f64) -> Term {
    Term::num(x)
}

fn marginal_body(target: &Term, weights: &MarginalWeights) -> Vec<Term> {
    let mut items = vec![Term::sym("Marginal"), target.clone()];
    match weights {
        MarginalWeights::Positional(ws) => items.push(Term::List(ws.iter().copied().map(num).collect())),
        MarginalWeights::Pairs(pairs) => {
            for (p, w) in pairs {
                items.push(p.clone());
                items.push(num(*w));
            }
        }
    }
    items
}

impl Command {
    /// The canonical form, as a term.
    pub fn to_term(&self) -> Term {
        let sym = Term::sym;
        match self {
            Command::Variable { pattern, values } => {
                let mut items = vec![sym("Variable"), pattern.clone()];
                items.extend(values.iter().cloned().map(Term::Sym));
                Term::List(items)
            }
            Command::Relation { parent, child, rules } => {
                let mut items = vec![sym("Relation"), parent.clone(), child.clone()];
                for r in rules {
                    let mut rule = vec![sym("->"), r.parent.clone()];
                    rule.extend(r.entries.iter().map(|(p, q)| Term::List(vec![p.clone(), num(*q)])));
                    items.push(Term::List(rule));
                }
                Term::List(items)
            }
            Command::Marginal { target, weights } => Term::List(marginal_body(target, weights)),
            Command::Instance(t) => Term::List(vec![sym("Instance"), t.clone()]),
            Command::Defactq(Fact::Proposition(t)) => Term::List(vec![sym("Defactq"), t.clone()]),
            Command::Defactq(Fact::Marginal { target, weights }) => {
                Term::List(vec![sym("Defactq"), Term::List(marginal_body(target, weights))])
            }
            Command::ProbabilityOf(t) => Term::List(vec![sym("Probability-of"), t.clone()]),
            Command::Retract(t) => Term::List(vec![sym("Retract"), t.clone()]),
            Command::ShowLabel(t) => Term::List(vec![sym("Show-label"), t.clone()]),
            Command::ShowNogoods => Term::List(vec![sym("Show-nogoods")]),
            Command::Reset => Term::List(vec![sym("Reset")]),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}
