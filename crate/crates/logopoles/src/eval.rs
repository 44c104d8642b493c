use num_complex::Complex64;

/// Evaluation route. The first nine variants are selectable through
/// [`MethodPolicy::Fixed`]; the remaining tags only appear in results of the
/// specialized entry points (reflections, negative degrees, identity helpers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    MultipoleSeries,
    SecondKindSum,
    OffsetSeries,
    ForwardRecurrence,
    BackwardRecurrence,
    ClosedForm,
    StableMinusM,
    AxisFormula,
    Quadrature,
    NaiveMinusM,
    RecurrenceM,
    Separated,
    NegativeDegree,
    ReflectedOrder,
    Exact,
    /// Finite cross-family assembly (spheroidal products from logopoles).
    RelationSum,
    /// Truncated infinite cross-family series (coefficient reconstructions,
    /// derivative series).
    CoefficientSeries,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::MultipoleSeries => "multipole-series",
            Route::SecondKindSum => "second-kind-sum",
            Route::OffsetSeries => "offset-series",
            Route::ForwardRecurrence => "forward",
            Route::BackwardRecurrence => "backward",
            Route::ClosedForm => "closed-form",
            Route::StableMinusM => "stable-minus-m",
            Route::AxisFormula => "axis",
            Route::Quadrature => "quadrature",
            Route::NaiveMinusM => "naive-minus-m",
            Route::RecurrenceM => "recurrence-m",
            Route::Separated => "separated",
            Route::NegativeDegree => "negative-degree",
            Route::ReflectedOrder => "reflected-order",
            Route::Exact => "exact",
            Route::RelationSum => "relation-sum",
            Route::CoefficientSeries => "coefficient-series",
        }
    }

    /// Parse a CLI method name. Accepts the names produced by [`Route::name`].
    pub fn parse(s: &str) -> Option<Route> {
        let r = match s {
            "multipole-series" => Route::MultipoleSeries,
            "second-kind-sum" => Route::SecondKindSum,
            "offset-series" => Route::OffsetSeries,
            "forward" => Route::ForwardRecurrence,
            "backward" => Route::BackwardRecurrence,
            "closed-form" => Route::ClosedForm,
            "stable-minus-m" => Route::StableMinusM,
            "axis" => Route::AxisFormula,
            "quadrature" | "oracle" => Route::Quadrature,
            "naive-minus-m" => Route::NaiveMinusM,
            "recurrence-m" => Route::RecurrenceM,
            "separated" => Route::Separated,
            "negative-degree" => Route::NegativeDegree,
            "reflected-order" => Route::ReflectedOrder,
            _ => return None,
        };
        Some(r)
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the top-level dispatcher picks an evaluation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodPolicy {
    /// Region-based selection (see `logopole::auto_route`).
    #[default]
    Auto,
    /// Force one route; fails with `RegionViolation` where inapplicable.
    Fixed(Route),
}

/// One evaluated value. `value` carries the full `exp(i m phi)` phase;
/// `est_error` is an absolute error estimate (heuristic for recurrences,
/// tail bound for series, accumulated panel error for quadrature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    pub method: Route,
    pub est_error: f64,
    pub terms_used: u32,
}

impl EvalResult {
    pub fn new(value: Complex64, method: Route, est_error: f64, terms_used: u32) -> Self {
        EvalResult {
            value,
            method,
            est_error,
            terms_used,
        }
    }

    /// Meridional profile result (phi = 0) promoted to a complex value.
    pub fn real(value: f64, method: Route, est_error: f64, terms_used: u32) -> Self {
        Self::new(Complex64::new(value, 0.0), method, est_error, terms_used)
    }
}

/// Tunable evaluation knobs shared by every route.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Relative tolerance target for series truncation and quadrature.
    pub tol: f64,
    /// Singularity tube radius as a fraction of R; points with
    /// `singular_distance < tube_frac * R` are rejected.
    pub tube_frac: f64,
    /// Hard cap on series terms before `NonConvergence`.
    pub term_cap: u32,
    /// Initial extra degrees for backward recurrence seeding.
    pub backward_padding: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tol: 1e-11,
            tube_frac: 1e-8,
            term_cap: 100_000,
            backward_padding: 60,
        }
    }
}

/// Neumaier-compensated accumulator for cancellation-prone sums.
/// `max_partial` tracks the largest intermediate magnitude and `abs_sum` the
/// sum of term magnitudes, so callers can estimate how many digits the final
/// subtraction destroyed.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    s: f64,
    c: f64,
    pub max_partial: f64,
    pub abs_sum: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
        self.abs_sum += x.abs();
        let mag = t.abs();
        if mag > self.max_partial {
            self.max_partial = mag;
        }
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }

    /// Estimated absolute rounding error of the accumulated value.
    ///
    /// The compensation recovers the accumulation rounding itself, but each
    /// term arrives already rounded (relative error of a few eps), and those
    /// input errors add up to roughly `eps * sum |term|` regardless of how the
    /// summation is organized. `abs_sum` dominates `max_partial` under heavy
    /// cancellation, which is exactly when this estimate matters.
    pub fn cancellation_error(&self) -> f64 {
        f64::EPSILON * self.abs_sum.max(self.max_partial)
    }
}
