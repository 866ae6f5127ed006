# hetrrr: subgroup identification with reduced-rank regression
