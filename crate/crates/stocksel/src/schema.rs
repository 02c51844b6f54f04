//! Default panel column schema.
//!
//! Names of the fundamental and technical factors used as default feature
//! columns. Panels with more columns than the named factors extend the
//! schema with generated `F###` names.

/// Named factor columns, in canonical order.
pub const FACTOR_NAMES: [&str; 124] = [
    "AccountsPayablesTDays", "AccountsPayablesTRate", "AdminiExpenseRate", "ARTDays",
    "ARTRate", "ASSI", "BLEV", "BondsPayableToAsset",
    "CashRateOfSales", "CashToCurrentLiability", "CMRA", "CTOP",
    "CTP5", "CurrentAssetsRatio", "CurrentAssetsTRate", "CurrentRatio",
    "DAVOL10", "DAVOL20", "DAVOL5", "DDNBT",
    "DDNCR", "DDNSR", "DebtEquityRatio", "DebtsAssetRatio",
    "DHILO", "DilutedEPS", "DVRAT", "EBITToTOR",
    "EGRO", "EMA10", "EMA120", "EMA20",
    "EMA5", "EMA60", "EPS", "EquityFixedAssetRatio",
    "EquityToAsset", "EquityTRate", "ETOP", "ETP5",
    "FinancialExpenseRate", "FinancingCashGrowRate", "FixAssetRatio", "FixedAssetsTRate",
    "GrossIncomeRatio", "HBETA", "HSIGMA", "IntangibleAssetRatio",
    "InventoryTDays", "InventoryTRate", "InvestCashGrowRate", "LCAP",
    "LFLO", "LongDebtToAsset", "LongDebtToWorkingCapital", "LongTermDebtToAsset",
    "MA10", "MA120", "MA20", "MA5",
    "MA60", "MAWVAD", "MFI", "MLEV",
    "NetAssetGrowRate", "NetProfitGrowRate", "NetProfitRatio", "NOCFToOperatingNI",
    "NonCurrentAssetsRatio", "NPParentCompanyGrowRate", "NPToTOR", "OperatingExpenseRate",
    "OperatingProfitGrowRate", "OperatingProfitRatio", "OperatingProfitToTOR", "OperatingRevenueGrowRate",
    "OperCashGrowRate", "OperCashInToCurrentLiability", "PB", "PCF",
    "PE", "PS", "PSY", "QuickRatio",
    "REVS10", "REVS20", "REVS5", "ROA",
    "ROA5", "ROE", "ROE5", "RSI",
    "RSTR12", "RSTR24", "SalesCostRatio", "SaleServiceCashToOR",
    "SUE", "TaxRatio", "TOBT", "TotalAssetGrowRate",
    "TotalAssetsTRate", "TotalProfitCostRatio", "TotalProfitGrowRate", "VOL10",
    "VOL120", "VOL20", "VOL240", "VOL5",
    "VOL60", "WVAD", "REC", "DAREC",
    "GREC", "FY12P", "DAREV", "GREV",
    "SFY12P", "DASREV", "GSREV", "FEARNG",
    "FSALESG", "TA2EV", "CFO2EV", "ACCA",
];

/// Default feature-column names for an `n`-column panel.
///
/// The first `min(n, FACTOR_NAMES.len())` columns use the named factors;
/// any remainder is filled with `F125`, `F126`, ... so every name stays
/// unique.
pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|j| {
            if j < FACTOR_NAMES.len() {
                FACTOR_NAMES[j].to_string()
            } else {
                format!("F{}", j + 1)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn factor_names_unique() {
        let set: HashSet<_> = FACTOR_NAMES.iter().collect();
        assert_eq!(set.len(), FACTOR_NAMES.len());
    }

    #[test]
    fn default_names_unique_at_244() {
        let names = default_feature_names(244);
        assert_eq!(names.len(), 244);
        let set: HashSet<_> = names.iter().collect();
        assert_eq!(set.len(), 244);
        assert_eq!(names[0], "AccountsPayablesTDays");
        assert_eq!(names[123], "ACCA");
        assert_eq!(names[124], "F125");
    }
}
