from app.data.dataset import MISSING, QuestionMeta, SurveyDataset
from app.data.frequency import (
    FrequencyMatrix,
    RareResponse,
    frequency_matrix,
    rare_response_report,
)
from app.data.loader import load_csv, write_csv
