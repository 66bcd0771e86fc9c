use super::encode::Layout;
use crate::{Error, Rational, Result};
use num_traits::Signed;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// A decision variable. `None` bounds are infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: Rational, rhs: Rational, tol: Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Ge => lhs + tol >= rhs,
            Relation::Eq => (lhs - rhs).abs() <= tol,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `Σ coeff·var (relation) rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.terms.iter().map(|(v, c)| *c * values[*v]).sum()
    }
}

/// Variables, linear constraints and a minimization objective.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSystem {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, Rational)>,
    index: HashMap<String, usize>,
    pub(crate) layout: Option<Layout>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Option<Rational>,
        upper: Option<Rational>,
    ) -> Result<usize> {
        let name = name.into();
        let (lower, upper) = match kind {
            VarKind::Binary => (Some(Rational::from_integer(0)), Some(Rational::from_integer(1))),
            VarKind::Continuous => (lower, upper),
        };
        if self.index.contains_key(&name) {
            return Err(Error::Consistency(format!("variable `{name}` declared twice")));
        }
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lower, upper });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) -> Result<()> {
        let name = name.into();
        if let Some((v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(Error::Consistency(format!("constraint `{name}` references undeclared variable {v}")));
        }
        self.constraints.push(Constraint {
            name,
            terms,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, Rational)>) {
        self.objective = terms;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, Rational)] {
        &self.objective
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn layout(&self) -> Option<&Layout> {
        self.layout.as_ref()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    pub fn objective_value(&self, values: &[Rational]) -> Rational {
        self.objective.iter().map(|(v, c)| *c * values[*v]).sum()
    }

    /// First violated bound, integrality or constraint, if any.
    pub fn first_violation(&self, values: &[Rational], tol: Rational) -> Option<(String, String)> {
        for (v, var) in self.variables.iter().enumerate() {
            let x = values[v];
            if var.lower.is_some_and(|lo| x + tol < lo) || var.upper.is_some_and(|hi| x > hi + tol) {
                return Some((var.name.clone(), format!("value {x} outside bounds")));
            }
            if var.kind == VarKind::Binary {
                let r = x.round();
                if (x - r).abs() > tol {
                    return Some((var.name.clone(), format!("binary variable has value {x}")));
                }
            }
        }
        for c in &self.constraints {
            let lhs = c.lhs(values);
            if !c.relation.holds(lhs, c.rhs, tol) {
                return Some((c.name.clone(), format!("lhs = {lhs}, required {} {}", c.relation, c.rhs)));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn rejects_duplicates_and_dangling_terms() {
        let mut s = ConstraintSystem::new();
        s.add_variable("t", VarKind::Continuous, Some(rat(0, 1)), None).unwrap();
        assert!(s.add_variable("t", VarKind::Binary, None, None).is_err());
        assert!(s.add_constraint("bad", vec![(3, rat(1, 1))], Relation::Ge, rat(1, 1)).is_err());
    }

    #[test]
    fn violations() {
        let mut s = ConstraintSystem::new();
        let t = s.add_variable("t", VarKind::Continuous, Some(rat(0, 1)), None).unwrap();
        let b = s.add_variable("b", VarKind::Binary, None, None).unwrap();
        s.add_constraint("lim", vec![(t, rat(1, 1)), (b, rat(1, 1))], Relation::Ge, rat(1, 1)).unwrap();
        let zero = rat(0, 1);
        assert_eq!(s.first_violation(&[rat(1, 2), rat(1, 1)], zero), None);
        assert_eq!(s.first_violation(&[rat(1, 2), rat(1, 2)], zero).unwrap().0, "b");
        assert_eq!(s.first_violation(&[rat(1, 2), rat(0, 1)], zero).unwrap().0, "lim");
        assert_eq!(s.first_violation(&[rat(-1, 2), rat(0, 1)], zero).unwrap().0, "t");
    }
}
