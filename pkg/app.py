from flask import Flask, jsonify

from config import APP_NAME
from exceptions import DistillationError


def create_app():
    app = Flask(APP_NAME)
    app.json.sort_keys = False

    from routes.api_routes import api
    app.register_blueprint(api)

    @app.errorhandler(DistillationError)
    def handle_distillation_error(e):
        """Uniform JSON envelope for simulator errors"""
        status = getattr(e, "http_status", 400)
        return jsonify({'success': False, 'error': str(e), 'code': status}), status

    @app.errorhandler(404)
    def handle_not_found(e):
        return jsonify({'success': False, 'error': 'Not found', 'code': 404}), 404

    @app.errorhandler(500)
    def handle_server_error(e):
        app.logger.exception('unhandled error')
        return jsonify({'success': False, 'error': 'Internal server error', 'code': 500}), 500

    return app


if __name__ == '__main__':
    create_app().run(debug=True, port=5000)
