# 蜕变测试模块
from .harness import (
    MR1, MR_PARAPHRASE, MR_ADD_DELETE, MetamorphicError, Addition, MutationSpec, MRViolation, MRReport,
    MetamorphicHarness, apply_mutation, load_mutation, check_mr1, check_paraphrase, check_add_delete,
)

__all__ = [
    'MR1', 'MR_PARAPHRASE', 'MR_ADD_DELETE', 'MetamorphicError', 'Addition', 'MutationSpec',
    'MRViolation', 'MRReport', 'MetamorphicHarness', 'apply_mutation', 'load_mutation',
    'check_mr1', 'check_paraphrase', 'check_add_delete',
]
