"""Plain-text reports, one `key<TAB>value` pair or one table row per line."""


def _fmt(value):
    if isinstance(value, float):
        return f'{value:.6f}'
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value) or '-'
    return str(value)


def format_table(rows, columns=None):
    if not rows:
        return ''
    columns = columns or list(rows[0])
    lines = ['\t'.join(columns)]
    lines += ['\t'.join(_fmt(row[c]) for c in columns) for row in rows]
    return '\n'.join(lines) + '\n'


def format_pairs(pairs):
    return ''.join(f'{key}\t{_fmt(value)}\n' for key, value in pairs)


def format_grid_report(result):
    rows = [row.to_dict() for row in result.rows]
    best = result.best
    return format_table(rows) + format_pairs([
        ('best_cell', ','.join(f'{k}={v}' for k, v in best.cell.to_dict().items())),
        (f'best_{best.metric_name}', best.valid_metric),
    ])


def format_cv_report(report):
    return format_table(report.folds) + format_pairs([
        ('mean_accuracy', report.mean),
        ('std_accuracy', report.std),
    ])


def format_tag_report(report):
    return format_table(report['tags'], ['tag', 'positives', 'roc_auc', 'pr_auc']) + format_pairs([
        ('roc_auc_macro', report['roc_auc_macro']),
        ('pr_auc_macro', report['pr_auc_macro']),
        ('skipped', report['skipped']),
    ])


def format_mask_statistics(cfm_stats, ccm_stats):
    pairs = [(f'cfm.{key}', value) for key, value in cfm_stats.items() if key != 'policy_proportions']
    pairs += [(f'cfm.policy.{name}', share) for name, share in cfm_stats['policy_proportions'].items()]
    for group, stats in ccm_stats.items():
        pairs += [(f'ccm.{group}.{key}', value) for key, value in stats.items()]
    return format_pairs(pairs)
